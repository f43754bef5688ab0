#include "adcast/service/api.hpp"

#include "adcast/errors.hpp"

#include <cmath>
#include <filesystem>

namespace adcast::service {

namespace {

std::vector<std::string> format_dates(Date first, std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(format_date(add_days(first, static_cast<long>(i))));
    return out;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        const std::size_t j = path.find('/', i);
        const std::size_t end = j == std::string::npos ? path.size() : j;
        if (end > i) parts.push_back(path.substr(i, end - i));
        i = end + 1;
    }
    return parts;
}

} // namespace

nlohmann::json error_body(int status, const std::string& message) {
    return {{"status", status}, {"error", message}};
}

Service::Service(RunStore store) : store_(std::move(store)), clusters_(store_.clusters()) {}

nlohmann::json Service::list_advertisers() const {
    const auto index = store_.model_index();
    auto list = nlohmann::json::array();
    for (const auto& s : store_.panel().advertisers()) {
        const auto it = index.find(s.advertiser_id);
        list.push_back({{"advertiser_id", s.advertiser_id},
                        {"category", s.category},
                        {"start", format_date(s.start)},
                        {"end", format_date(add_days(s.start, static_cast<long>(s.size()) - 1))},
                        {"n_days", s.size()},
                        {"config_tags", it == index.end() ? std::vector<std::string>{} : it->second}});
    }
    return {{"run_id", store_.run_id()}, {"origin", format_date(store_.origin())}, {"advertisers", list}};
}

nlohmann::json Service::history(const std::string& advertiser_id) const {
    const auto* s = store_.panel().find(advertiser_id);
    if (!s) throw NotFoundError("unknown advertiser " + advertiser_id);
    // NaN serializes as null.
    return {{"advertiser_id", s->advertiser_id},
            {"category", s->category},
            {"dates", format_dates(s->start, s->size())},
            {"cpc", s->cpc},
            {"budget", s->adbudget},
            {"clicks", s->adclicks},
            {"adcost", s->adcost},
            {"impressions", s->impressions}};
}

nlohmann::json Service::clusters() const {
    if (clusters_.empty()) throw NotFoundError("clusters not computed yet");
    const auto category = clustering::category_clusters(store_.panel());
    auto methods = nlohmann::json::object();
    for (const auto& [method, a] : clusters_) {
        auto labels = nlohmann::json::object();
        for (std::size_t i = 0; i < a.ids.size(); ++i) labels[a.ids[i]] = a.labels[i];
        const auto cmp = clustering::compare_assignments(a, category);
        methods[clustering::to_string(method)] = {{"k", a.k},
                                                  {"labels", labels},
                                                  {"ari_vs_category", cmp.ari},
                                                  {"contingency_vs_category", cmp.contingency}};
    }
    return {{"categories", category.cluster_names}, {"methods", methods}};
}

nlohmann::json Service::backtest_report() const {
    const auto path = store_.reports_dir() / "backtest.json";
    if (!std::filesystem::exists(path)) throw NotFoundError("backtest report not computed yet");
    return nlohmann::json::parse(read_file(path));
}

std::shared_ptr<const ModelBundle> Service::bundle(const std::string& advertiser_id,
                                                   const std::string& config_tag) const {
    const auto key = std::make_pair(advertiser_id, config_tag);
    {
        std::lock_guard lock(cache_mutex_);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto loaded = std::make_shared<const ModelBundle>(store_.load_bundle(advertiser_id, config_tag));
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(key, std::move(loaded)).first->second;
}

nlohmann::json Service::forecast(const nlohmann::json& request) const {
    if (!request.is_object()) throw ValidationError("forecast request must be a JSON object");
    std::string advertiser_id, config_tag;
    std::size_t horizon = 0;
    try {
        advertiser_id = request.at("advertiser_id").get<std::string>();
        config_tag = request.at("config_tag").get<std::string>();
        horizon = request.at("horizon").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("forecast request: ") + e.what());
    }
    if (!store_.panel().find(advertiser_id)) throw NotFoundError("unknown advertiser " + advertiser_id);
    const auto b = bundle(advertiser_id, config_tag);
    if (!b->models.count(horizon)) {
        throw ValidationError("horizon " + std::to_string(horizon) + " is not trained for " + config_tag);
    }
    const auto& model = b->at(horizon);
    const pipeline::GridEntry entry{model.config, b->composition};
    const auto input =
        pipeline::job_input(store_.panel(), advertiser_id, entry, clusters_, b->origin, horizon, store_.config().seed);

    nlohmann::json response = {{"advertiser_id", advertiser_id},
                               {"config_tag", config_tag},
                               {"horizon", horizon},
                               {"origin", format_date(b->origin)}};
    if (input.budget_variable()) response["stored_plan"] = pipeline::budget_plan(input);

    const auto plan_it = request.find("budget_plan");
    if (plan_it == request.end() || plan_it->is_null()) {
        response["forecast"] = models::predict(model, input);
        return response;
    }
    if (!input.budget_variable()) throw ValidationError("model has no budget channel");
    if (!plan_it->is_array() || plan_it->empty()) throw ValidationError("budget_plan must be a non-empty array");
    auto plan = pipeline::budget_plan(input);
    long expected = -1;
    for (const auto& item : *plan_it) {
        Date d;
        double amount = 0.0;
        try {
            d = parse_date(item.at("date").get<std::string>());
            amount = item.at("amount").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("budget_plan entry: ") + e.what());
        }
        const long offset = days_between(b->origin, d);
        if (offset < 0 || offset >= static_cast<long>(horizon)) {
            throw ValidationError("budget_plan date " + format_date(d) + " is outside the forecast horizon");
        }
        if (expected >= 0 && offset != expected) throw ValidationError("budget_plan dates must be contiguous");
        if (!std::isfinite(amount) || amount < 0.0) {
            throw ValidationError("budget_plan amount on " + format_date(d) + " must be finite and non-negative");
        }
        plan[static_cast<std::size_t>(offset)] = amount;
        expected = offset + 1;
    }
    const auto result = pipeline::whatif(model, input, plan);
    response["forecast"] = result.baseline;
    response["scenario"] = result.scenario;
    response["delta"] = result.delta;
    return response;
}

ApiResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
    try {
        const auto parts = split_path(path);
        if (method == "GET") {
            if (parts.size() == 1 && parts[0] == "advertisers") return {200, list_advertisers()};
            if (parts.size() == 3 && parts[0] == "advertisers" && parts[2] == "history") return {200, history(parts[1])};
            if (parts.size() == 1 && parts[0] == "clusters") return {200, clusters()};
            if (parts.size() == 2 && parts[0] == "reports" && parts[1] == "backtest") return {200, backtest_report()};
        } else if (method == "POST" && parts.size() == 1 && parts[0] == "forecast") {
            nlohmann::json request;
            try {
                request = nlohmann::json::parse(body);
            } catch (const nlohmann::json::parse_error& e) {
                return {400, error_body(400, std::string("malformed JSON: ") + e.what())};
            }
            return {200, forecast(request)};
        }
        return {404, error_body(404, "no route for " + method + " " + path)};
    } catch (const NotFoundError& e) {
        return {404, error_body(404, e.what())};
    } catch (const ValidationError& e) {
        return {422, error_body(422, e.what())};
    } catch (const std::exception& e) {
        return {500, error_body(500, e.what())};
    }
}

} // namespace adcast::service
