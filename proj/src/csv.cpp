#include "shipctl/csv.hpp"

#include <cmath>
#include <cstdio>

#include "shipctl/error.hpp"

namespace shipctl {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header, int precision)
    : path_(path), out_(path), precision_(precision) {
    if (!out_) throw Error(ErrorKind::Config, "cannot write " + path);
    for (const auto& h : header) cell(h);
    end_row();
    rows_ = 0;
}

void CsvWriter::sep() {
    if (!first_) out_ << ',';
    first_ = false;
}

CsvWriter& CsvWriter::cell(double x) {
    sep();
    if (std::isnan(x)) {
        out_ << "nan";
        return *this;
    }
    if (std::isinf(x)) {
        out_ << (x > 0 ? "inf" : "-inf");
        return *this;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision_, x);
    out_ << buf;
    return *this;
}

CsvWriter& CsvWriter::cell(long x) {
    sep();
    out_ << x;
    return *this;
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    sep();
    out_ << s;
    return *this;
}

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
    ++rows_;
}

void CsvWriter::row(std::initializer_list<double> xs) {
    for (double x : xs) cell(x);
    end_row();
}

}  // namespace shipctl
