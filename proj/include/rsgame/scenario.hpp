#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rsgame/errors.hpp"
#include "rsgame/model.hpp"

namespace rsgame {

// ---------------------------------------------------------------------------
// Minimal TOML-subset reader: tables, arrays of tables, numbers, booleans,
// strings, and (nested) numeric arrays. Covers the scenario schema without
// pulling in a full TOML dependency.
// ---------------------------------------------------------------------------

struct TomlValue {
    enum class Type { number, boolean, string, array, table };
    Type type = Type::table;
    double num = 0.0;
    bool flag = false;
    std::string str;
    std::vector<TomlValue> arr;
    std::map<std::string, TomlValue> tab;

    bool has(const std::string& key) const { return tab.count(key) != 0; }
    const TomlValue& at(const std::string& key) const {
        auto it = tab.find(key);
        if (it == tab.end()) throw ScenarioError("missing key: " + key);
        return it->second;
    }
    double number() const {
        if (type != Type::number) throw ScenarioError("expected a number");
        return num;
    }
};

namespace toml_detail {

class Parser {
  public:
    explicit Parser(const std::string& text) : s_(text) {}

    TomlValue parse() {
        TomlValue root;
        TomlValue* current = &root;
        skip_space(true);
        while (!eof()) {
            if (peek() == '[') {
                current = header(root);
            } else {
                key_value(*current);
            }
            skip_space(true);
        }
        return root;
    }

  private:
    const std::string& s_;
    size_t pos_ = 0;
    int line_ = 1;

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }
    char get() {
        char c = s_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ScenarioError("parse error at line " + std::to_string(line_) + ": " + msg);
    }

    void skip_space(bool newlines) {
        while (!eof()) {
            const char c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
                get();
            } else {
                break;
            }
        }
    }

    std::string bare_key() {
        skip_space(false);
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-')) {
            k.push_back(get());
        }
        if (k.empty()) fail("expected a key");
        return k;
    }

    TomlValue* header(TomlValue& root) {
        get();  // '['
        const bool array_of_tables = !eof() && peek() == '[';
        if (array_of_tables) get();

        TomlValue* node = &root;
        while (true) {
            const std::string part = bare_key();
            node = &node->tab[part];
            skip_space(false);
            if (!eof() && peek() == '.') {
                get();
                if (node->type != TomlValue::Type::table && node->type != TomlValue::Type::array)
                    fail("key reused as table: " + part);
                if (node->type == TomlValue::Type::array) node = &node->arr.back();
                continue;
            }
            break;
        }
        if (array_of_tables) {
            node->type = TomlValue::Type::array;
            node->arr.emplace_back();
            node = &node->arr.back();
        }
        node->type = TomlValue::Type::table;

        skip_space(false);
        if (eof() || get() != ']') fail("expected ']'");
        if (array_of_tables) {
            if (eof() || get() != ']') fail("expected ']]'");
        }
        return node;
    }

    void key_value(TomlValue& table) {
        const std::string key = bare_key();
        skip_space(false);
        if (eof() || get() != '=') fail("expected '=' after " + key);
        skip_space(false);
        if (table.tab.count(key)) fail("duplicate key: " + key);
        table.tab[key] = value();
    }

    TomlValue value() {
        skip_space(false);
        if (eof()) fail("expected a value");
        const char c = peek();
        TomlValue v;
        if (c == '[') {
            get();
            v.type = TomlValue::Type::array;
            skip_space(true);
            while (!eof() && peek() != ']') {
                v.arr.push_back(value());
                skip_space(true);
                if (!eof() && peek() == ',') {
                    get();
                    skip_space(true);
                }
            }
            if (eof()) fail("unterminated array");
            get();  // ']'
            return v;
        }
        if (c == '"') {
            get();
            v.type = TomlValue::Type::string;
            while (!eof() && peek() != '"') v.str.push_back(get());
            if (eof()) fail("unterminated string");
            get();
            return v;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::string word = bare_key();
            if (word == "true" || word == "false") {
                v.type = TomlValue::Type::boolean;
                v.flag = word == "true";
                return v;
            }
            fail("unexpected token: " + word);
        }
        // number
        std::string num;
        while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '+' ||
                          peek() == '-' || peek() == '.' || peek() == 'e' || peek() == 'E' ||
                          peek() == '_')) {
            const char d = get();
            if (d != '_') num.push_back(d);
        }
        if (num.empty()) fail("expected a number");
        char* end = nullptr;
        v.type = TomlValue::Type::number;
        v.num = std::strtod(num.c_str(), &end);
        if (end == num.c_str() || *end != '\0') fail("bad number: " + num);
        return v;
    }
};

}  // namespace toml_detail

inline TomlValue parse_toml(const std::string& text) {
    return toml_detail::Parser(text).parse();
}

// ---------------------------------------------------------------------------
// Scenario schema
// ---------------------------------------------------------------------------

namespace scenario_detail {

inline Mat read_matrix(const TomlValue& v, int rows, int cols, const std::string& name) {
    Mat m(rows, cols);
    if (v.type == TomlValue::Type::number) {
        if (rows != 1 || cols != 1)
            throw ScenarioError(name + ": scalar given, expected " + std::to_string(rows) +
                                "x" + std::to_string(cols));
        m(0, 0) = v.num;
        return m;
    }
    if (v.type != TomlValue::Type::array) throw ScenarioError(name + ": expected a matrix");

    if (!v.arr.empty() && v.arr.front().type == TomlValue::Type::array) {
        if (static_cast<int>(v.arr.size()) != rows)
            throw ScenarioError(name + ": expected " + std::to_string(rows) + " rows");
        for (int r = 0; r < rows; ++r) {
            const auto& row = v.arr[r];
            if (static_cast<int>(row.arr.size()) != cols)
                throw ScenarioError(name + ": row " + std::to_string(r + 1) + " must have " +
                                    std::to_string(cols) + " entries");
            for (int c = 0; c < cols; ++c) m(r, c) = row.arr[c].number();
        }
        return m;
    }
    if (static_cast<int>(v.arr.size()) != rows * cols)
        throw ScenarioError(name + ": expected " + std::to_string(rows * cols) +
                            " entries (row-major)");
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = v.arr[static_cast<size_t>(r) * cols + c].number();
    return m;
}

inline Vec read_vector(const TomlValue& v, int size, const std::string& name) {
    const Mat m = read_matrix(v, size, 1, name);
    return m.col(0);
}

inline int read_int(const TomlValue& v, const std::string& name) {
    const double d = v.number();
    const int k = static_cast<int>(d);
    if (static_cast<double>(k) != d) throw ScenarioError(name + ": expected an integer");
    return k;
}

}  // namespace scenario_detail

/// Parse a scenario document into a validated model. Validation failures
/// reject the scenario unless allow_invalid is set.
inline GameModel load_scenario_text(const std::string& text, bool allow_invalid = false) {
    using scenario_detail::read_int;
    using scenario_detail::read_matrix;
    using scenario_detail::read_vector;

    const TomlValue doc = parse_toml(text);

    GameModel model;
    const TomlValue& dims = doc.at("dims");
    model.dims.n = read_int(dims.at("n"), "dims.n");
    model.dims.m = read_int(dims.at("m"), "dims.m");
    model.dims.nv = read_int(dims.at("n_v"), "dims.n_v");
    model.dims.D = read_int(dims.at("D"), "dims.D");
    model.dims.T = dims.at("T").number();
    model.dims.check();
    const int n = model.dims.n, m = model.dims.m, nv = model.dims.nv, D = model.dims.D;

    model.generator.lambda = read_matrix(doc.at("generator"), D, D, "generator");
    model.gamma = doc.at("gamma").number();

    const TomlValue& init = doc.at("initial");
    model.initial_time = init.at("t").number();
    model.initial_state = read_vector(init.at("xi"), n, "initial.xi");
    model.initial_regime = read_int(init.at("regime"), "initial.regime") - 1;

    const TomlValue& regimes = doc.at("regime");
    if (regimes.type != TomlValue::Type::array || static_cast<int>(regimes.arr.size()) != D)
        throw ScenarioError("expected " + std::to_string(D) + " [[regime]] blocks, got " +
                            std::to_string(regimes.arr.size()));

    model.coeffs.resize(D);
    model.weights.resize(D);
    for (int i = 0; i < D; ++i) {
        const TomlValue& r = regimes.arr[i];
        const std::string tag = "regime[" + std::to_string(i + 1) + "].";
        auto mat = [&](const char* key, int rr, int cc) {
            return Piecewise<Mat>(read_matrix(r.at(key), rr, cc, tag + key));
        };
        auto opt_vec = [&](const char* key, int size) {
            return r.has(key) ? Piecewise<Vec>(read_vector(r.at(key), size, tag + key))
                              : Piecewise<Vec>(Vec::Zero(size));
        };
        RegimeCoeffs& c = model.coeffs[i];
        c.A = mat("A", n, n);
        c.B1 = mat("B1", n, m);
        c.B2 = mat("B2", n, nv);
        c.C = mat("C", n, n);
        c.D1 = mat("D1", n, m);
        c.D2 = mat("D2", n, nv);
        c.Cbar = mat("Cbar", n, n);
        c.D1bar = mat("D1bar", n, m);
        c.D2bar = mat("D2bar", n, nv);
        c.b = opt_vec("b", n);
        c.sigma = opt_vec("sigma", n);
        c.sigmabar = opt_vec("sigmabar", n);

        RegimeWeights& w = model.weights[i];
        w.Q = mat("Q", n, n);
        w.R1 = mat("R1", m, m);
        w.R2 = mat("R2", nv, nv);
        w.S1 = mat("S1", m, n);
        w.S2 = mat("S2", nv, n);
        w.G = read_matrix(r.at("G"), n, n, tag + "G");
        w.q = opt_vec("q", n);
        w.rho1 = opt_vec("rho1", m);
        w.rho2 = opt_vec("rho2", nv);
        w.g = r.has("g") ? read_vector(r.at("g"), n, tag + "g") : Vec::Zero(n);
    }

    model.check_shape();
    const ValidationReport report = validate(model);
    if (!report.pass() && !allow_invalid)
        throw ScenarioError("scenario fails validation:\n" + report.summary());
    return model;
}

inline GameModel load_scenario(const std::string& path, bool allow_invalid = false) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_scenario_text(buf.str(), allow_invalid);
}

/// Bundled two-regime stock-market scenario: regime 1 models a bear market,
/// regime 2 a bull market.
inline const char* bull_bear_market_toml() {
    return R"(# Two-regime stock market scenario.
# Regime 1 is the bear market, regime 2 the bull market; the system is
# homogeneous (no drift offsets, additive noise, or linear cost terms).

generator = [[-1.0, 1.0], [2.0, -2.0]]
gamma = 1.0

[dims]
n = 1
m = 1
n_v = 1
D = 2
T = 3.5

[initial]
t = 0.0
xi = [1.0]
regime = 1

[[regime]]  # bear market
A = 0.1
B1 = 0.3
B2 = -0.2
C = 0.3
D1 = 0.3
D2 = -0.25
Cbar = 0.1
D1bar = 0.3
D2bar = -0.2
Q = 0.3
R1 = 0.2
R2 = 0.1
S1 = 0.2
S2 = -0.1
G = 0.0

[[regime]]  # bull market
A = 0.2
B1 = 0.2
B2 = -0.1
C = 0.2
D1 = 0.1
D2 = -0.1
Cbar = 0.2
D1bar = 0.1
D2bar = -0.05
Q = 0.2
R1 = 0.1
R2 = 0.05
S1 = 0.1
S2 = -0.05
G = 0.0
)";
}

inline GameModel bull_bear_market_model() {
    return load_scenario_text(bull_bear_market_toml());
}

}  // namespace rsgame
