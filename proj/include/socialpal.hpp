// Copyright 2026 The Social PaL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "socialpal/bloom_filter.hpp"
#include "socialpal/bytes.hpp"
#include "socialpal/capability_service.hpp"
#include "socialpal/capability_store.hpp"
#include "socialpal/coverage_sim.hpp"
#include "socialpal/crypto.hpp"
#include "socialpal/discovery_client.hpp"
#include "socialpal/osn_connector.hpp"
#include "socialpal/psi_session.hpp"
#include "socialpal/server_api.hpp"
#include "socialpal/social_graph.hpp"
#include "socialpal/socket_transport.hpp"
