// Copyright 2026 The bddp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "bddp/gaussian.hpp"
#include "bddp/layout.hpp"
#include "bddp/models.hpp"
#include "bddp/numdiff.hpp"
#include "bddp/ekf.hpp"
#include "bddp/truncated_normal.hpp"
#include "bddp/constrained.hpp"
#include "bddp/domain_spec.hpp"
#include "bddp/belief_mdp.hpp"
#include "bddp/ddp.hpp"
#include "bddp/execution.hpp"
#include "bddp/domains/planar_nav.hpp"
#include "bddp/domains/hand_eye.hpp"
#include "bddp/domains/lqg.hpp"
#include "bddp/runner.hpp"
