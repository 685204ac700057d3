#include "flowlab/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace flowlab {

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buffer, ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const std::filesystem::path temp = path.string() + ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("write_file_atomic: cannot open " + temp.string());
        out << content;
        out.flush();
        if (!out) {
            std::error_code ignore;
            std::filesystem::remove(temp, ignore);
            throw std::runtime_error("write_file_atomic: write failed for " +
                                     temp.string());
        }
    }
    std::filesystem::rename(temp, path);
}

CsvBuilder::CsvBuilder(const std::vector<std::string>& header)
    : columns_(header.size()) {
    if (header.empty())
        throw std::invalid_argument("CsvBuilder: header must be nonempty");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) out_ += ',';
        out_ += header[i];
    }
    out_ += '\n';
}

CsvBuilder& CsvBuilder::cell(const std::string& value) {
    if (value.find_first_of(",\"\n\r") != std::string::npos)
        throw std::invalid_argument("CsvBuilder: cell would need quoting: " + value);
    return raw(value);
}

CsvBuilder& CsvBuilder::raw(std::string text) {
    if (cells_in_row_ >= columns_)
        throw std::logic_error("CsvBuilder: row has more cells than the header");
    if (cells_in_row_ > 0) out_ += ',';
    out_ += text;
    ++cells_in_row_;
    return *this;
}

void CsvBuilder::end_row() {
    if (cells_in_row_ != columns_)
        throw std::logic_error("CsvBuilder: row has " +
                               std::to_string(cells_in_row_) + " cells, header has " +
                               std::to_string(columns_));
    out_ += '\n';
    cells_in_row_ = 0;
}

const std::string& CsvBuilder::str() const {
    if (cells_in_row_ != 0)
        throw std::logic_error("CsvBuilder: last row is unfinished");
    return out_;
}

std::string trajectories_to_csv(const std::vector<Trajectory>& trajectories) {
    int dim = 0;
    for (const auto& traj : trajectories)
        if (!traj.states.empty()) dim = static_cast<int>(traj.states[0].cols());

    std::vector<std::string> header = {"path_label", "step_index", "t", "point_index"};
    for (int c = 0; c < dim; ++c) header.push_back("x" + std::to_string(c));

    CsvBuilder csv(header);
    for (const auto& traj : trajectories) {
        traj.check_shape();
        for (std::size_t s = 0; s < traj.states.size(); ++s) {
            const Batch& state = traj.states[s];
            for (int p = 0; p < state.rows(); ++p) {
                csv.cell(traj.label)
                    .cell(static_cast<int>(s))
                    .cell(traj.times[s]);
                csv.cell(p);
                for (int c = 0; c < state.cols(); ++c) csv.cell(state(p, c));
                csv.end_row();
            }
        }
    }
    return csv.str();
}

} // namespace flowlab
