// Copyright 2026 The Covebo Authors.
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

#include "covebo/acquisition.hpp"
#include "covebo/coverage.hpp"
#include "covebo/errors.hpp"
#include "covebo/gp.hpp"
#include "covebo/harness.hpp"
#include "covebo/optimizer.hpp"
#include "covebo/random.hpp"
#include "covebo/tasks.hpp"
#include "covebo/training_subset.hpp"
#include "covebo/trust_region.hpp"
