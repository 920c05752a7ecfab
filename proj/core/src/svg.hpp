#pragma once

#include <string>
#include <vector>

namespace vlfsig::svg {

// Minimal polyline chart: first column is x, remaining columns are series.
// Best-effort convenience output; the CSV files stay the contractual format.
std::string line_chart(const std::vector<std::vector<double>>& columns,
                       const std::vector<std::string>& names, const std::string& title);

}  // namespace vlfsig::svg
