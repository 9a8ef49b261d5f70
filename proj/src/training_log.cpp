#include "streamnet/training_log.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "streamnet/tensor.hpp"

namespace streamnet {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first != last && *first == ' ') ++first;
    while (last != first && (last[-1] == ' ' || last[-1] == '\r')) --last;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || first == last) {
        throw Error("not a number: '" + text + "'");
    }
    return v;
}

void write_log_csv(std::ostream& os, const TrainingLog& log) {
    os << kLogHeader << '\n';
    for (const LogRow& r : log.rows) {
        os << format_double(r.epoch) << ',' << format_double(r.train_loss) << ',' << format_double(r.clean_acc)
           << ',' << format_double(r.noisy_acc) << ',' << format_double(r.wall_ms) << '\n';
    }
}

std::string log_to_csv(const TrainingLog& log) {
    std::ostringstream os;
    write_log_csv(os, log);
    return os.str();
}

TrainingLog read_log_csv(std::istream& is, const std::string& tag) {
    TrainingLog log;
    log.tag = tag;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != kLogHeader) throw Error("line " + std::to_string(line_no) + ": expected header '" + kLogHeader + "'");
            header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5) {
            throw Error("line " + std::to_string(line_no) + ": expected 5 fields, found " + std::to_string(fields.size()));
        }
        try {
            log.rows.push_back(LogRow{parse_double(fields[0]), parse_double(fields[1]), parse_double(fields[2]),
                                      parse_double(fields[3]), parse_double(fields[4])});
        } catch (const Error& e) {
            throw Error("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header) throw Error("line 1: empty CSV, expected header '" + std::string(kLogHeader) + "'");
    return log;
}

double final_window_mean(const TrainingLog& log, LogColumn column, std::size_t window) {
    if (log.rows.empty()) throw Error("final_window_mean: empty log");
    const std::size_t take = std::min(window, log.rows.size());
    double sum = 0.0;
    for (std::size_t i = log.rows.size() - take; i < log.rows.size(); ++i) {
        const LogRow& r = log.rows[i];
        sum += column == LogColumn::train_loss ? r.train_loss
               : column == LogColumn::clean_acc ? r.clean_acc
                                                : r.noisy_acc;
    }
    return sum / static_cast<double>(take);
}

} // namespace streamnet
