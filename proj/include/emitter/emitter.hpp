// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "emitter/checkpoint.hpp"
#include "emitter/common.hpp"
#include "emitter/config.hpp"
#include "emitter/data_model.hpp"
#include "emitter/model.hpp"
#include "emitter/normalize.hpp"
#include "emitter/nn/layers.hpp"
#include "emitter/nn/loss.hpp"
#include "emitter/nn/optim.hpp"
#include "emitter/nn/parameter.hpp"
#include "emitter/nn/recurrent.hpp"
#include "emitter/pulse_sim.hpp"
#include "emitter/run_config.hpp"
#include "emitter/train_eval.hpp"
