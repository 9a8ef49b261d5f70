#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace streamnet {

struct LogRow {
    double epoch = 0.0;
    double train_loss = 0.0;
    double clean_acc = 0.0;
    double noisy_acc = 0.0;
    double wall_ms = 0.0;

    friend bool operator==(const LogRow&, const LogRow&) = default;
};

struct TrainingLog {
    std::string tag;
    std::vector<LogRow> rows;

    friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

inline constexpr const char* kLogHeader = "epoch,train_loss,clean_acc,noisy_acc,wall_ms";

/// Shortest round-trip decimal form; identical values always print identically.
std::string format_double(double v);
double parse_double(const std::string& text);

void write_log_csv(std::ostream& os, const TrainingLog& log);
std::string log_to_csv(const TrainingLog& log);
/// Parses the CSV schema above; errors name the offending line number.
TrainingLog read_log_csv(std::istream& is, const std::string& tag = {});

enum class LogColumn { train_loss, clean_acc, noisy_acc };

/// Mean of a column over the last `window` rows (all rows when fewer).
double final_window_mean(const TrainingLog& log, LogColumn column, std::size_t window = 10);

} // namespace streamnet
