#pragma once

#include "adcast/service/run_store.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace adcast::service {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Read-only request handling over one loaded run. Safe for concurrent use:
/// model bundles are loaded once on first use and then shared.
class Service {
public:
    explicit Service(RunStore store);

    const RunStore& store() const { return store_; }

    nlohmann::json list_advertisers() const;
    nlohmann::json history(const std::string& advertiser_id) const;
    nlohmann::json clusters() const;
    nlohmann::json backtest_report() const;
    nlohmann::json forecast(const nlohmann::json& request) const;

    /// Routes a request and maps errors: ValidationError 422 (400 for
    /// malformed JSON), NotFoundError 404, anything else 500.
    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

    std::shared_ptr<const ModelBundle> bundle(const std::string& advertiser_id, const std::string& config_tag) const;

private:
    RunStore store_;
    pipeline::ClusterSet clusters_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::pair<std::string, std::string>, std::shared_ptr<const ModelBundle>> cache_;
};

nlohmann::json error_body(int status, const std::string& message);

} // namespace adcast::service
