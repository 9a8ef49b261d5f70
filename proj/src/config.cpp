#include "streamnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "streamnet/data_io.hpp"
#include "streamnet/rng.hpp"

namespace streamnet {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

std::size_t to_count(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(const std::string& key, const std::string& v) {
    try {
        return parse_double(v);
    } catch (const Error&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + f(items[i]);
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

// Ordered key table; the echo lists keys in this order.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto count = [&](const char* key, std::size_t RunConfig::*m) {
            t.emplace_back(key, Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = to_count(k, v); },
                                      [m](const RunConfig& c) { return std::to_string(c.*m); }});
        };
        auto u64 = [&](const char* key, std::uint64_t RunConfig::*m) {
            t.emplace_back(key, Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = to_u64(k, v); },
                                      [m](const RunConfig& c) { return std::to_string(c.*m); }});
        };
        auto real = [&](const char* key, double RunConfig::*m) {
            t.emplace_back(key, Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
                                      [m](const RunConfig& c) { return format_double(c.*m); }});
        };
        auto flag = [&](const char* key, bool RunConfig::*m) {
            t.emplace_back(key, Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = to_bool(k, v); },
                                      [m](const RunConfig& c) { return bool_text(c.*m); }});
        };
        auto path = [&](const char* key, fs::path RunConfig::*m) {
            t.emplace_back(key, Field{[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
                                      [m](const RunConfig& c) { return (c.*m).string(); }});
        };

        t.emplace_back("dataset", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                            if (v != "synthetic" && v != "cifar10" && v != "raw") {
                                                throw ConfigError(k, "expected synthetic, cifar10 or raw, got '" + v + "'");
                                            }
                                            c.dataset = v;
                                        },
                                        [](const RunConfig& c) { return c.dataset; }});
        path("data_dir", &RunConfig::data_dir);
        path("train_path", &RunConfig::train_path);
        path("test_path", &RunConfig::test_path);
        count("train_size", &RunConfig::train_size);
        count("test_size", &RunConfig::test_size);
        u64("data_seed", &RunConfig::data_seed);
        count("n_classes", &RunConfig::n_classes);
        count("image_size", &RunConfig::image_size);
        count("channels", &RunConfig::channels);

        t.emplace_back("architecture",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 try {
                                     c.architecture = parse_architecture(v);
                                 } catch (const Error& e) {
                                     throw ConfigError(k, e.what());
                                 }
                             },
                             [](const RunConfig& c) { return c.architecture.str(); }});
        count("conv5_filters", &RunConfig::conv5_filters);
        count("fc_hidden", &RunConfig::fc_hidden);
        count("fc_layers", &RunConfig::fc_layers);
        t.emplace_back("base_filters", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                                 const auto items = split_list(v);
                                                 if (items.size() != 4) throw ConfigError(k, "expected 4 comma-separated counts");
                                                 for (std::size_t i = 0; i < 4; ++i) c.base_filters[i] = to_count(k, items[i]);
                                             },
                                             [](const RunConfig& c) {
                                                 return std::to_string(c.base_filters[0]) + ", " +
                                                        std::to_string(c.base_filters[1]) + ", " +
                                                        std::to_string(c.base_filters[2]) + ", " +
                                                        std::to_string(c.base_filters[3]);
                                             }});
        count("filter_divisor", &RunConfig::filter_divisor);
        flag("same_padding", &RunConfig::same_padding);
        t.emplace_back("slice_membership",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "per_channel") {
                                     c.slice_membership = SliceMembership::per_channel;
                                 } else if (v == "luminance") {
                                     c.slice_membership = SliceMembership::luminance;
                                 } else {
                                     throw ConfigError(k, "expected per_channel or luminance, got '" + v + "'");
                                 }
                             },
                             [](const RunConfig& c) {
                                 return std::string(c.slice_membership == SliceMembership::per_channel ? "per_channel"
                                                                                                       : "luminance");
                             }});

        real("noise_ratio", &RunConfig::noise_ratio);
        t.emplace_back("noise_mode", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                               if (v == "location") {
                                                   c.noise_mode = NoiseMode::location;
                                               } else if (v == "per_channel") {
                                                   c.noise_mode = NoiseMode::per_channel;
                                               } else {
                                                   throw ConfigError(k, "expected location or per_channel, got '" + v + "'");
                                               }
                                           },
                                           [](const RunConfig& c) {
                                               return std::string(c.noise_mode == NoiseMode::location ? "location"
                                                                                                      : "per_channel");
                                           }});
        t.emplace_back("train_noise", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                                if (v == "clean") {
                                                    c.train_noise = TrainNoise::clean;
                                                } else if (v == "noisy") {
                                                    c.train_noise = TrainNoise::noisy;
                                                } else {
                                                    throw ConfigError(k, "expected clean or noisy, got '" + v + "'");
                                                }
                                            },
                                            [](const RunConfig& c) {
                                                return std::string(c.train_noise == TrainNoise::clean ? "clean" : "noisy");
                                            }});
        count("epochs", &RunConfig::epochs);
        count("batch_size", &RunConfig::batch_size);
        u64("seed", &RunConfig::seed);
        count("eval_every", &RunConfig::eval_every);
        count("eval_batch", &RunConfig::eval_batch);
        real("lr", &RunConfig::lr);
        real("beta1", &RunConfig::beta1);
        real("beta2", &RunConfig::beta2);
        real("epsilon", &RunConfig::epsilon);
        flag("adam_conventional_betas", &RunConfig::adam_conventional_betas);
        flag("log_wall_time", &RunConfig::log_wall_time);
        count("stream_threads", &RunConfig::stream_threads);

        t.emplace_back("architectures",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 std::vector<ArchitectureChoice> out;
                                 for (const auto& item : split_list(v)) {
                                     try {
                                         out.push_back(parse_architecture(item));
                                     } catch (const Error& e) {
                                         throw ConfigError(k, e.what());
                                     }
                                 }
                                 c.architectures = std::move(out);
                             },
                             [](const RunConfig& c) {
                                 return join<ArchitectureChoice>(c.architectures,
                                                                 [](const ArchitectureChoice& a) { return a.str(); });
                             }});
        t.emplace_back("noise_ratios", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                                 std::vector<double> out;
                                                 for (const auto& item : split_list(v)) out.push_back(to_double(k, item));
                                                 c.noise_ratios = std::move(out);
                                             },
                                             [](const RunConfig& c) {
                                                 return join<double>(c.noise_ratios,
                                                                     [](const double& r) { return format_double(r); });
                                             }});
        t.emplace_back("seeds", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                          std::vector<std::uint64_t> out;
                                          for (const auto& item : split_list(v)) out.push_back(to_u64(k, item));
                                          c.seeds = std::move(out);
                                      },
                                      [](const RunConfig& c) {
                                          return join<std::uint64_t>(c.seeds,
                                                                     [](const std::uint64_t& s) { return std::to_string(s); });
                                      }});
        count("workers", &RunConfig::workers);
        count("kl_bins", &RunConfig::kl_bins);
        real("kl_alpha", &RunConfig::kl_alpha);
        path("output_dir", &RunConfig::output_dir);
        return t;
    }();
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& [name, f] : fields())
        if (name == key) return &f;
    return nullptr;
}

bool on_grid(double r) {
    const double s = r * 10.0;
    return r >= 0.0 && r <= 0.9 + 1e-12 && std::abs(s - std::round(s)) < 1e-9;
}

} // namespace

std::string ArchitectureChoice::str() const {
    if (vertex == Vertex::v1) return "v1";
    return vertex_name(vertex) + ":" + std::to_string(n);
}

ArchitectureChoice parse_architecture(const std::string& text) {
    const std::string t = trim(text);
    const auto colon = t.find(':');
    ArchitectureChoice a;
    a.vertex = parse_vertex(t.substr(0, colon));
    if (colon == std::string::npos) {
        if (a.vertex != Vertex::v1) throw Error("architecture '" + t + "' needs a count, e.g. " + t + ":5");
        return a;
    }
    const std::string n = t.substr(colon + 1);
    std::size_t value = 0;
    const auto res = std::from_chars(n.data(), n.data() + n.size(), value);
    if (n.empty() || res.ec != std::errc{} || res.ptr != n.data() + n.size() || value == 0) {
        throw Error("architecture '" + t + "': count must be a positive integer");
    }
    if (a.vertex == Vertex::v1 && value != 1) throw Error("architecture v1 takes no count");
    a.n = value;
    return a;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError(key, "unknown key");
    f->set(*this, key, trim(value));
}

void RunConfig::validate() const {
    if (dataset == "cifar10") {
        if (data_dir.empty()) throw ConfigError("data_dir", "required when dataset = cifar10");
        if (!fs::is_directory(data_dir)) throw ConfigError("data_dir", "'" + data_dir.string() + "' is not a directory");
    } else if (dataset == "raw") {
        if (train_path.empty()) throw ConfigError("train_path", "required when dataset = raw");
        if (test_path.empty()) throw ConfigError("test_path", "required when dataset = raw");
        if (!fs::is_regular_file(train_path)) throw ConfigError("train_path", "'" + train_path.string() + "' not found");
        if (!fs::is_regular_file(test_path)) throw ConfigError("test_path", "'" + test_path.string() + "' not found");
    } else {
        if (train_size == 0 || train_size % n_classes != 0) {
            throw ConfigError("train_size", "synthetic data needs a positive multiple of n_classes");
        }
        if (test_size == 0 || test_size % n_classes != 0) {
            throw ConfigError("test_size", "synthetic data needs a positive multiple of n_classes");
        }
        if (image_size < 8) throw ConfigError("image_size", "must be at least 8");
        if (channels == 0) throw ConfigError("channels", "must be positive");
    }
    if (n_classes < 2) throw ConfigError("n_classes", "must be at least 2");
    if (!on_grid(noise_ratio)) throw ConfigError("noise_ratio", "must be one of 0.0, 0.1, ..., 0.9");
    if (noise_ratios.empty()) throw ConfigError("noise_ratios", "must list at least one ratio");
    for (double r : noise_ratios)
        if (!on_grid(r)) throw ConfigError("noise_ratios", format_double(r) + " is not one of 0.0, 0.1, ..., 0.9");
    if (architectures.empty()) throw ConfigError("architectures", "must list at least one architecture");
    if (seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
    if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
    if (eval_batch == 0) throw ConfigError("eval_batch", "must be positive");
    if (filter_divisor == 0) throw ConfigError("filter_divisor", "must be positive");
    for (std::size_t b : base_filters)
        if (b / filter_divisor == 0) throw ConfigError("filter_divisor", "leaves a conv layer without filters");
    if (fc_layers > 0 && fc_hidden == 0) throw ConfigError("fc_hidden", "must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
    if (kl_bins < 2) throw ConfigError("kl_bins", "must be at least 2");
    if (!(kl_alpha >= 0.0)) throw ConfigError("kl_alpha", "must be non-negative");
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    try {
        experiment().validate();
        for (const auto& a : architectures) experiment(a, noise_ratio, seed).validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("architecture", e.what());
    }
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
    return out;
}

ExperimentConfig RunConfig::experiment(const ArchitectureChoice& arch, double ratio, std::uint64_t run_seed) const {
    ExperimentConfig e;
    NetworkSpec& ns = e.network;
    ns.vertex = arch.vertex;
    switch (arch.vertex) {
    case Vertex::v1: break;
    case Vertex::v5: ns.width_multiplier = arch.n; break;
    case Vertex::v6: ns.n_streams = arch.n; break;
    case Vertex::v7:
        ns.width_multiplier = arch.n;
        ns.slice_spec = make_slice_spec(arch.n);
        break;
    case Vertex::v8:
        ns.n_streams = arch.n;
        ns.slice_spec = make_slice_spec(arch.n);
        break;
    }
    ns.membership = slice_membership;
    ns.n_classes = n_classes;
    ns.conv5_filters = conv5_filters == 0 ? n_classes : conv5_filters;
    ns.fc_hidden = fc_hidden;
    ns.fc_layers = fc_layers;
    ns.base_filters = base_filters;
    ns.filter_divisor = filter_divisor;
    ns.same_padding = same_padding;
    if (dataset == "synthetic") {
        ns.in_channels = channels;
        ns.in_height = ns.in_width = image_size;
    } else if (dataset == "cifar10") {
        ns.in_channels = 3;
        ns.in_height = ns.in_width = 32;
    } else {
        // Raw dumps carry their own shape; load_datasets() checks it against these.
        ns.in_channels = channels;
        ns.in_height = ns.in_width = image_size;
    }
    e.adam = adam_conventional_betas ? AdamConfig{lr, 0.9, 0.999, epsilon} : AdamConfig{lr, beta1, beta2, epsilon};
    e.noise_ratio = ratio;
    e.noise_mode = noise_mode;
    e.train_noise = train_noise;
    e.epochs = epochs;
    e.batch_size = batch_size;
    e.seed = run_seed;
    e.eval_every = eval_every;
    e.eval_batch = eval_batch;
    e.dataset = dataset;
    e.dataset_key = dataset_key();
    e.log_wall_time = log_wall_time;
    e.stream_threads = stream_threads;
    return e;
}

ExperimentConfig RunConfig::experiment() const { return experiment(architecture, noise_ratio, seed); }

std::vector<ExperimentConfig> RunConfig::sweep_cells() const {
    std::vector<ExperimentConfig> cells;
    for (const auto& a : architectures)
        for (double r : noise_ratios)
            for (std::uint64_t s : seeds) cells.push_back(experiment(a, r, s));
    return cells;
}

std::string RunConfig::dataset_key() const {
    std::ostringstream os;
    os << dataset << ";train_size=" << train_size << ";test_size=" << test_size << ";data_seed=" << data_seed;
    if (dataset == "synthetic") {
        os << ";classes=" << n_classes << ";size=" << image_size << ";channels=" << channels;
    } else if (dataset == "cifar10") {
        os << ";dir=" << fs::absolute(data_dir).lexically_normal().string();
    } else {
        os << ";train=" << fs::absolute(train_path).lexically_normal().string()
           << ";test=" << fs::absolute(test_path).lexically_normal().string();
    }
    return os.str();
}

std::size_t RunConfig::resolved_workers() const { return workers > 0 ? workers : default_thread_count(); }

RunConfig parse_run_config(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second) {
            throw ConfigError(key, "line " + std::to_string(line_no) + ": set more than once");
        }
        if (find_field(key) == nullptr) throw ConfigError(key, "line " + std::to_string(line_no) + ": unknown key");
        base.set(key, line.substr(eq + 1));
    }
    return base;
}

RunConfig load_run_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error&) {
        throw ConfigError("", "cannot read config file '" + path.string() + "'");
    }
    return parse_run_config(text);
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("", "override '" + o + "' is not key=value");
        config.set(trim(o.substr(0, eq)), o.substr(eq + 1));
    }
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& config) {
    config.validate();
    if (config.dataset == "synthetic") {
        SyntheticSpec s;
        s.n_classes = config.n_classes;
        s.train_per_class = config.train_size / config.n_classes;
        s.test_per_class = config.test_size / config.n_classes;
        s.channels = config.channels;
        s.size = config.image_size;
        s.seed = config.data_seed;
        return generate_synthetic(s);
    }
    std::pair<Dataset, Dataset> data;
    if (config.dataset == "cifar10") {
        data = load_cifar10(config.data_dir, CifarOptions{config.train_size, config.test_size, config.data_seed});
    } else {
        data.first = read_raw_dump(config.train_path, Split::train);
        data.second = read_raw_dump(config.test_path, Split::test);
        if (config.train_size > 0 && config.train_size < data.first.size()) {
            data.first = stratified_subset(data.first, config.train_size, config.data_seed);
        }
        if (config.test_size > 0 && config.test_size < data.second.size()) {
            data.second = stratified_subset(data.second, config.test_size, derive_seed(config.data_seed, {1}));
        }
        const Shape s = data.first.image_shape();
        if (s.c != config.channels || s.h != config.image_size || s.w != config.image_size) {
            throw ConfigError("image_size", "raw dump holds " + s.str() + " images; set channels and image_size to match");
        }
    }
    for (Dataset* d : {&data.first, &data.second}) {
        if (d->n_classes > config.n_classes) {
            throw ConfigError("n_classes", "dataset has " + std::to_string(d->n_classes) + " classes");
        }
    }
    return data;
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("STREAMNET_THREADS")) {
        std::size_t v = 0;
        const std::string s = env;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec == std::errc{} && res.ptr == s.data() + s.size() && v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace streamnet
