#include "khclust/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace kh {

InputError::InputError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(line == 0 ? what
                                   : what + " (line " + std::to_string(line) + ", column " +
                                         std::to_string(column) + ")"),
      line_(line),
      column_(column) {}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return false;
    }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::ifstream open_or_throw(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    return in;
}

/// Next whitespace-delimited header token of a PNM file, skipping comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            if (!tok.empty()) {
                break;
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                break;
            }
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) {
        throw InputError("truncated PGM header");
    }
    return tok;
}

std::size_t pnm_number(std::istream& in, const char* what) {
    const auto tok = pnm_token(in);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw InputError(std::string("bad PGM ") + what + " '" + tok + "'");
    }
    return v;
}

}  // namespace

Dataset read_csv(std::istream& in) {
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) {
            continue;
        }
        const auto fields = split_fields(body);
        std::vector<double> row(fields.size());
        std::size_t bad = 0;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (!parse_double(fields[j], row[j])) {
                bad = j + 1;
                break;
            }
        }
        if (bad != 0) {
            if (first) {
                first = false;
                continue;
            }
            throw InputError("not a finite number: '" + std::string(trim(fields[bad - 1])) + "'", line_no, bad);
        }
        first = false;
        if (dim == 0) {
            dim = row.size();
        } else if (row.size() != dim) {
            throw InputError("expected " + std::to_string(dim) + " fields, got " + std::to_string(row.size()), line_no,
                             std::min(row.size(), dim) + 1);
        }
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) {
        throw InputError("no data rows");
    }
    return Dataset(rows, dim, std::move(values));
}

Dataset read_csv_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_csv(in);
}

GrayImage read_pgm(std::istream& in) {
    const auto magic = pnm_token(in);
    if (magic != "P2" && magic != "P5") {
        throw InputError("not a PGM file (magic '" + magic + "')");
    }
    const auto width = pnm_number(in, "width");
    const auto height = pnm_number(in, "height");
    const auto maxval = pnm_number(in, "maxval");
    if (width == 0 || height == 0) {
        throw InputError("PGM with zero size");
    }
    if (maxval == 0 || maxval > 255) {
        throw InputError("PGM maxval must lie in [1, 255], got " + std::to_string(maxval));
    }
    std::vector<double> px(width * height);
    if (magic == "P5") {
        std::vector<char> raw(px.size());
        in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
            throw InputError("truncated PGM raster");
        }
        for (std::size_t i = 0; i < px.size(); ++i) {
            px[i] = static_cast<unsigned char>(raw[i]);
        }
    } else {
        for (auto& v : px) {
            v = static_cast<double>(pnm_number(in, "sample"));
        }
    }
    for (double v : px) {
        if (v > static_cast<double>(maxval)) {
            throw InputError("PGM sample above maxval");
        }
    }
    return GrayImage(width, height, std::move(px));
}

GrayImage read_pgm_file(const std::string& path) {
    auto in = open_or_throw(path, std::ios::in | std::ios::binary);
    return read_pgm(in);
}

void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::string raw(img.size(), '\0');
    for (std::size_t i = 0; i < img.size(); ++i) {
        raw[i] = static_cast<char>(static_cast<unsigned char>(std::clamp(std::floor(img.pixels[i] + 0.5), 0.0, 255.0)));
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

void write_pgm_file(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path);
    }
    write_pgm(out, img);
}

}  // namespace kh
