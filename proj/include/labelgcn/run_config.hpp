#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "labelgcn/graph_data.hpp"
#include "labelgcn/training.hpp"

namespace labelgcn {

enum class Command { train, sweep, inductive, gradcheck, analyze_labels };

std::string_view command_name(Command c);

/// Raw `key = value` settings before defaults are applied.
using KeyValues = std::map<std::string, std::string>;

/// Flat config text: one `key = value` per line, `#` starts a comment.
/// Throws UsageError naming the origin and line for malformed or repeated keys.
KeyValues parse_config_text(std::string_view text, const std::string& origin);
KeyValues read_config_file(const std::filesystem::path& path);

struct ConfigKey {
    std::string name;  ///< snake_case; the flag is --name with dashes
    std::string help;
    bool is_flag = false;
};

/// Keys accepted by a command, in manifest order.
const std::vector<ConfigKey>& config_keys(Command c);

struct RunConfig {
    std::string dataset;
    std::filesystem::path data_dir;
    std::filesystem::path content, cites;                            ///< citation layout
    std::filesystem::path features_csv, classes_csv, edgelist_csv;   ///< Elliptic layout
    std::filesystem::path out;
    bool label_gcn = true;
    std::size_t hidden = 16;
    double dropout = 0.5;
    double lr = 0.01;
    std::size_t epochs = 300;
    std::size_t patience = 10;  ///< 0 disables early stopping
    std::size_t oversample = 1;
    SplitSizes sizes;
    double support_fraction = 1.0;
    std::vector<double> fractions;
    std::size_t splits = 20;
    std::size_t inits = 5;
    bool baseline = true;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    bool normalize_features = false;
    InductiveLabelProtocol protocol = InductiveLabelProtocol::hide_scored_step;
    int last_train_step = 34;
    int last_step = 49;
    int shutdown_step = 43;
    std::size_t bins = 40;
    std::size_t gradcheck_nodes = 20;
    std::size_t gradcheck_coords = 20;
    bool corrupt_adjoint = false;

    bool is_elliptic() const { return !features_csv.empty(); }
};

/// Applies per-command and per-dataset defaults to `kv` and validates every
/// value. Dataset paths default to <data_dir>/<dataset>/..., and data_dir to
/// $LABELGCN_DATA_DIR or ./data. Throws UsageError.
RunConfig resolve_config(Command c, const KeyValues& kv);

/// Every key of the command with its resolved value, in a form
/// resolve_config reads back to the same RunConfig.
std::string manifest_text(Command c, const RunConfig& config);

/// Loads the dataset the config names. Missing files raise UsageError,
/// malformed ones DataError.
GraphDataset load_dataset(const RunConfig& config);

}  // namespace labelgcn
