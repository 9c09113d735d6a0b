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

#include <memory>

#include "socialpal/capability_store.hpp"
#include "socialpal/osn_connector.hpp"

namespace socialpal {

/// A client's channel to the capability server, bound to one user.
class CapabilityService {
 public:
  virtual ~CapabilityService() = default;
  virtual void upload(const Capability& cap) = 0;
  virtual DistributionResult download(unsigned d_max) = 0;
};

/// In-process service talking straight to a store; used by tests, the
/// simulator and the local discovery demo.
class LocalCapabilityService : public CapabilityService {
 public:
  LocalCapabilityService(std::shared_ptr<CapabilityStore> store, std::shared_ptr<const OsnConnector> connector,
                         OsnId uid)
      : store_(std::move(store)), connector_(std::move(connector)), uid_(std::move(uid)) {}

  void upload(const Capability& cap) override { store_->upload_capability(uid_, cap, *connector_); }

  DistributionResult download(unsigned d_max) override {
    return store_->distribute(uid_, std::min(d_max, store_->config().d_max));
  }

 private:
  std::shared_ptr<CapabilityStore> store_;
  std::shared_ptr<const OsnConnector> connector_;
  OsnId uid_;
};

}  // namespace socialpal
