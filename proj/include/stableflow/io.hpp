#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "density.hpp"
#include "dynamics.hpp"
#include "measure.hpp"

// Serialization layer: columnar point files, CSV tables, binary noise tapes,
// content digests. Every number goes through format_full so a file written,
// read back and written again is byte-identical.

namespace stableflow::io {

inline constexpr const char* code_version = "0.1.0";

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_count(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(v));
    return buf;
}

// ---- columnar point format --------------------------------------------------
// One point per row: d coordinates then a weight (or a density value),
// space separated, '\n' row endings.

template <std::size_t D>
void write_points(std::ostream& out, const meas::empirical_measure<D>& mu) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t k = 0; k < D; ++k) out << format_full(mu.points[i][k]) << ' ';
        out << format_full(mu.weights[i]) << '\n';
    }
}

template <std::size_t D>
void write_points(const std::filesystem::path& path, const meas::empirical_measure<D>& mu) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_points: cannot open " + path.string());
    write_points(out, mu);
    require(out.good(), "write_points: write failed on " + path.string());
}

template <std::size_t D>
meas::empirical_measure<D> read_points(std::istream& in) {
    std::vector<vec<D>> pts;
    std::vector<double> w;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        vec<D> p;
        double weight = 0.0;
        for (std::size_t k = 0; k < D; ++k)
            require(static_cast<bool>(row >> p[k]),
                    "read_points: bad coordinate at line " + std::to_string(lineno));
        require(static_cast<bool>(row >> weight),
                "read_points: missing weight at line " + std::to_string(lineno));
        std::string extra;
        require(!(row >> extra), "read_points: trailing field at line " + std::to_string(lineno));
        pts.push_back(p);
        w.push_back(weight);
    }
    return meas::empirical_measure<D>::from_points(std::move(pts), std::move(w));
}

template <std::size_t D>
meas::empirical_measure<D> read_points(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "read_points: cannot open " + path.string());
    return read_points<D>(in);
}

template <std::size_t D>
void write_grid(std::ostream& out, const density::density_grid<D>& grid) {
    for (std::size_t j = 0; j < grid.values.size(); ++j) {
        const vec<D> x = grid.node(j);
        for (std::size_t k = 0; k < D; ++k) out << format_full(x[k]) << ' ';
        out << format_full(grid.values[j]) << '\n';
    }
}

template <std::size_t D>
void write_grid(const std::filesystem::path& path, const density::density_grid<D>& grid) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_grid: cannot open " + path.string());
    write_grid(out, grid);
    require(out.good(), "write_grid: write failed on " + path.string());
}

// ---- CSV tables --------------------------------------------------------------
// '.' decimal separator, '\n' row endings, stable column order, full round-trip
// precision. Cells are quoted only when they contain a delimiter.

struct csv_table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static std::string cell(double v) { return format_full(v); }
    static std::string cell(std::uint64_t v) { return format_count(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(const std::string& s) { return s; }

    template <class... Cells>
    void add(const Cells&... cells) {
        std::vector<std::string> row{cell(cells)...};
        require(row.size() == header.size(), "csv_table: row width mismatch");
        rows.push_back(std::move(row));
    }

    void write(std::ostream& out) const {
        write_row(out, header);
        for (const auto& row : rows) write_row(out, row);
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        require(out.good(), "csv_table: cannot open " + path.string());
        write(out);
        require(out.good(), "csv_table: write failed on " + path.string());
    }

    static csv_table load(std::istream& in) {
        csv_table t;
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fields = split_row(line);
            if (first) {
                t.header = std::move(fields);
                first = false;
            } else {
                require(fields.size() == t.header.size(), "csv_table: ragged row");
                t.rows.push_back(std::move(fields));
            }
        }
        require(!first, "csv_table: empty file");
        return t;
    }

    static csv_table load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "csv_table: cannot open " + path.string());
        return load(in);
    }

private:
    static void write_row(std::ostream& out, const std::vector<std::string>& row) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out << ',';
            out << escaped(row[k]);
        }
        out << '\n';
    }

    static std::string escaped(const std::string& field) {
        if (field.find_first_of(",\"\n") == std::string::npos) return field;
        std::string out = "\"";
        for (char c : field) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    static std::vector<std::string> split_row(const std::string& line) {
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        cur += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(std::move(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        require(!quoted, "csv_table: unterminated quote");
        fields.push_back(std::move(cur));
        return fields;
    }
};

// ---- content digests ----------------------------------------------------------

inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string digest_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string digest_string(const std::string& s) {
    return digest_hex(fnv1a(s.data(), s.size()));
}

inline std::string digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "digest_file: cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return digest_hex(h);
}

// ---- plain text helpers ---------------------------------------------------------

inline void save_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_text: cannot open " + path.string());
    out << content;
    require(out.good(), "save_text: write failed on " + path.string());
}

inline std::string load_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_text: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---- binary noise tape -----------------------------------------------------------
// Little-endian, explicit record layout so tapes survive a toolchain change:
//   magic "SFTP", u32 version, u32 dim, u32 particles, u32 steps,
//   then particles * steps records of (u32 step, u32 particle, dim * f64).

namespace tape_detail {

constexpr char magic[4] = {'S', 'F', 'T', 'P'};
constexpr std::uint32_t version = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
    out.write(b, 4);
}

inline void put_f64(std::ostream& out, double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((u >> (8 * k)) & 0xff);
    out.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& in) {
    char b[4];
    in.read(b, 4);
    require(in.gcount() == 4, "noise tape: truncated header or record");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[k])) << (8 * k);
    return v;
}

inline double get_f64(std::istream& in) {
    char b[8];
    in.read(b, 8);
    require(in.gcount() == 8, "noise tape: truncated record");
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[k])) << (8 * k);
    return std::bit_cast<double>(u);
}

}  // namespace tape_detail

template <std::size_t D>
void write_tape(std::ostream& out, const model::noise_tape<D>& tape) {
    tape.validate();
    out.write(tape_detail::magic, 4);
    tape_detail::put_u32(out, tape_detail::version);
    tape_detail::put_u32(out, static_cast<std::uint32_t>(D));
    tape_detail::put_u32(out, tape.particles);
    tape_detail::put_u32(out, tape.steps);
    for (std::uint32_t s = 0; s < tape.steps; ++s)
        for (std::uint32_t p = 0; p < tape.particles; ++p) {
            tape_detail::put_u32(out, s);
            tape_detail::put_u32(out, p);
            const vec<D>& z = tape.at(s, p);
            for (std::size_t k = 0; k < D; ++k) tape_detail::put_f64(out, z[k]);
        }
    require(out.good(), "write_tape: write failed");
}

template <std::size_t D>
void write_tape(const std::filesystem::path& path, const model::noise_tape<D>& tape) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_tape: cannot open " + path.string());
    write_tape(out, tape);
}

template <std::size_t D>
model::noise_tape<D> read_tape(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, tape_detail::magic, 4) == 0,
            "noise tape: bad magic");
    const std::uint32_t version = tape_detail::get_u32(in);
    require(version == tape_detail::version,
            "noise tape: unsupported version " + std::to_string(version));
    const std::uint32_t dim = tape_detail::get_u32(in);
    require(dim == D, "noise tape: dimension " + std::to_string(dim) + " does not match " +
                          std::to_string(D));
    const std::uint32_t particles = tape_detail::get_u32(in);
    const std::uint32_t steps = tape_detail::get_u32(in);
    model::noise_tape<D> tape;
    tape.resize(particles, steps);
    std::vector<char> seen(static_cast<std::size_t>(particles) * steps, 0);
    for (std::size_t r = 0; r < seen.size(); ++r) {
        const std::uint32_t s = tape_detail::get_u32(in);
        const std::uint32_t p = tape_detail::get_u32(in);
        require(s < steps && p < particles, "noise tape: record index out of range");
        const std::size_t flat = static_cast<std::size_t>(s) * particles + p;
        require(!seen[flat], "noise tape: duplicate record");
        seen[flat] = 1;
        for (std::size_t k = 0; k < D; ++k) tape.increments[flat][k] = tape_detail::get_f64(in);
    }
    char extra;
    require(!in.read(&extra, 1), "noise tape: trailing bytes");
    tape.validate();
    return tape;
}

template <std::size_t D>
model::noise_tape<D> read_tape(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "read_tape: cannot open " + path.string());
    return read_tape<D>(in);
}

}  // namespace stableflow::io
