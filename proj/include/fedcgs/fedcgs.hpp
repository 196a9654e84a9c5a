/*
 * Copyright 2026 The fedcgs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "fedcgs/client_stats.hpp"
#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/feature_expand.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/metrics.hpp"
#include "fedcgs/numcore.hpp"
#include "fedcgs/partitioner.hpp"
#include "fedcgs/personalize.hpp"
#include "fedcgs/random.hpp"
#include "fedcgs/secure_agg.hpp"
#include "fedcgs/serialization.hpp"
#include "fedcgs/server_agg.hpp"
#include "fedcgs/simulate.hpp"
