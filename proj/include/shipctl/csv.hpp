#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace shipctl {

/// Minimal CSV writer: header once, rows of numbers or strings, fixed precision.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header, int precision = 10);

    CsvWriter& cell(double x);
    CsvWriter& cell(long x);
    CsvWriter& cell(int x) { return cell(static_cast<long>(x)); }
    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(const char* s) { return cell(std::string(s)); }
    void end_row();
    void row(std::initializer_list<double> xs);

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] long rows() const { return rows_; }

private:
    void sep();
    std::string path_;
    std::ofstream out_;
    int precision_;
    bool first_ = true;
    long rows_ = 0;
};

}  // namespace shipctl
