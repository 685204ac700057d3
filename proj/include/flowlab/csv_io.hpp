#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowlab/ode.hpp"

namespace flowlab {

/// Shortest decimal text that parses back to exactly the same double, so
/// repeated runs emit byte-identical artifacts and nothing is lost on
/// round-trip.
std::string format_double(double value);

/// Write `content` so that `path` only ever holds a complete file: the text
/// lands in a sibling temp file which is renamed into place. Parent
/// directories are created as needed.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Row-oriented CSV assembly against a fixed header. Cells are written in
/// column order; end_row() checks the count. Cell text must not need CSV
/// quoting (no commas, quotes or newlines) -- all of our schemas are plain
/// identifiers and numbers, so a cell that needs quoting is a bug.
class CsvBuilder {
public:
    explicit CsvBuilder(const std::vector<std::string>& header);

    CsvBuilder& cell(const std::string& value);
    CsvBuilder& cell(const char* value) { return cell(std::string(value)); }
    CsvBuilder& cell(double value) { return raw(format_double(value)); }
    CsvBuilder& cell(int value) { return raw(std::to_string(value)); }
    CsvBuilder& cell(std::uint64_t value) { return raw(std::to_string(value)); }
    void end_row();

    /// The assembled document; valid once every row has been closed.
    const std::string& str() const;

private:
    CsvBuilder& raw(std::string text);

    std::size_t columns_ = 0;
    std::size_t cells_in_row_ = 0;
    std::string out_;
};

/// Flatten recorded trajectories to the documented CSV schema
/// path_label,step_index,t,point_index,x0..x{d-1} (one line per point per
/// recorded state, trajectories in the order given).
std::string trajectories_to_csv(const std::vector<Trajectory>& trajectories);

} // namespace flowlab
