// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dapnet/config.hpp"
#include "dapnet/cpn_prior.hpp"
#include "dapnet/detection.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/eval_metrics.hpp"
#include "dapnet/frpn_assign.hpp"
#include "dapnet/geometry.hpp"
#include "dapnet/json_io.hpp"
#include "dapnet/losses.hpp"
#include "dapnet/pipeline.hpp"
#include "dapnet/proposal_select.hpp"
#include "dapnet/scene_sim.hpp"
