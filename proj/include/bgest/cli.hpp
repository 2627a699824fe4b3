#pragma once

#include "bgest/mrf_estimator.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace bgest::cli {

inline constexpr int kReportSchemaVersion = 1;

/// Every configurable key with its effective value; echoed into reports.
struct RunConfig {
    EstimatorConfig estimator;
    int width = 0;   // raw input only
    int height = 0;  // raw input only
    int ep_threshold = 20;

    /// Applies one `key=value` setting; keys use snake_case (dashes accepted).
    void set(const std::string& key, const std::string& value);
    std::map<std::string, std::string> echo() const;
};

/// Parses a flat `key = value` file; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Entry point shared by the `bgest` binary and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bgest::cli
