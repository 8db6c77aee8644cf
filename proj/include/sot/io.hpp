#pragma once

#include <cctype>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "sot/common.hpp"
#include "sot/rational.hpp"

namespace sot::io {

/// Document node of the problem/result text format: scalars are kept as raw
/// tokens so the exact mode can re-parse decimals as rationals.
struct Value {
    enum class Kind { Scalar, List, Block };
    Kind kind = Kind::Scalar;
    std::string scalar;
    std::vector<Value> items;                            // List
    std::vector<std::pair<std::string, Value>> fields;   // Block, ordered, repeatable

    static Value scalar_of(std::string s) {
        Value v;
        v.scalar = std::move(s);
        return v;
    }
    static Value list() {
        Value v;
        v.kind = Kind::List;
        return v;
    }
    static Value block() {
        Value v;
        v.kind = Kind::Block;
        return v;
    }

    const Value* find(const std::string& key) const {
        for (const auto& [k, v] : fields)
            if (k == key) return &v;
        return nullptr;
    }
    std::vector<const Value*> find_all(const std::string& key) const {
        std::vector<const Value*> out;
        for (const auto& [k, v] : fields)
            if (k == key) out.push_back(&v);
        return out;
    }
    const Value& expect(const std::string& key) const {
        const Value* v = find(key);
        if (!v) throw ParseError("missing key: " + key);
        return *v;
    }
    Value& set(const std::string& key, Value v) {
        fields.emplace_back(key, std::move(v));
        return fields.back().second;
    }
};

namespace detail {

struct Tokenizer {
    const std::string& text;
    std::size_t pos = 0;

    void skip() {
        for (;;) {
            while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
            if (pos < text.size() && text[pos] == '#') {
                while (pos < text.size() && text[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
    }

    bool done() {
        skip();
        return pos >= text.size();
    }

    char peek() {
        skip();
        return pos < text.size() ? text[pos] : '\0';
    }

    std::string next() {
        skip();
        if (pos >= text.size()) throw ParseError("unexpected end of document");
        const char c = text[pos];
        if (c == '[' || c == ']' || c == '{' || c == '}' || c == '=' || c == ',') {
            ++pos;
            return std::string(1, c);
        }
        if (c == '"') {
            std::size_t end = text.find('"', pos + 1);
            if (end == std::string::npos) throw ParseError("unterminated string");
            std::string s = text.substr(pos + 1, end - pos - 1);
            pos = end + 1;
            return "\"" + s;  // marker prefix distinguishes strings
        }
        std::size_t start = pos;
        while (pos < text.size()) {
            const char d = text[pos];
            if (std::isspace(static_cast<unsigned char>(d)) || d == '[' || d == ']' || d == '{' ||
                d == '}' || d == '=' || d == ',' || d == '#')
                break;
            ++pos;
        }
        if (pos == start) throw ParseError("bad character in document");
        return text.substr(start, pos - start);
    }
};

inline Value parse_value(Tokenizer& tk);

inline Value parse_block_body(Tokenizer& tk, bool top_level) {
    Value block = Value::block();
    for (;;) {
        if (top_level) {
            if (tk.done()) break;
        } else if (tk.peek() == '}') {
            tk.next();
            break;
        }
        std::string key = tk.next();
        if (key.size() == 1 && (key[0] == '{' || key[0] == '[' || key[0] == '=' || key[0] == ',' ||
                                key[0] == ']' || key[0] == '}'))
            throw ParseError("expected a key, got '" + key + "'");
        char c = tk.peek();
        if (c == '=') {
            tk.next();
            block.set(key, parse_value(tk));
        } else if (c == '{') {
            tk.next();
            block.set(key, parse_block_body(tk, false));
        } else {
            throw ParseError("expected '=' or '{' after key '" + key + "'");
        }
    }
    return block;
}

inline Value parse_value(Tokenizer& tk) {
    char c = tk.peek();
    if (c == '[') {
        tk.next();
        Value list = Value::list();
        for (;;) {
            c = tk.peek();
            if (c == ']') {
                tk.next();
                break;
            }
            if (c == ',') {
                tk.next();
                continue;
            }
            list.items.push_back(parse_value(tk));
        }
        return list;
    }
    if (c == '{') {
        tk.next();
        return parse_block_body(tk, false);
    }
    std::string tok = tk.next();
    if (!tok.empty() && tok[0] == '"') tok = tok.substr(1);
    return Value::scalar_of(tok);
}

inline bool needs_quotes(const std::string& s) {
    if (s.empty()) return true;
    for (char c : s)
        if (std::isspace(static_cast<unsigned char>(c)) || c == '[' || c == ']' || c == '{' ||
            c == '}' || c == '=' || c == ',' || c == '#' || c == '"')
            return true;
    return false;
}

inline void write_value(std::ostringstream& os, const Value& v, int indent);

inline void write_fields(std::ostringstream& os, const Value& block, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    for (const auto& [k, v] : block.fields) {
        os << pad << k;
        if (v.kind == Value::Kind::Block) {
            os << " {\n";
            write_fields(os, v, indent + 1);
            os << pad << "}\n";
        } else {
            os << " = ";
            write_value(os, v, indent);
            os << "\n";
        }
    }
}

inline void write_value(std::ostringstream& os, const Value& v, int indent) {
    switch (v.kind) {
        case Value::Kind::Scalar:
            if (needs_quotes(v.scalar))
                os << '"' << v.scalar << '"';
            else
                os << v.scalar;
            break;
        case Value::Kind::List: {
            bool flat = true;
            for (const auto& it : v.items)
                if (it.kind != Value::Kind::Scalar) flat = false;
            if (flat && v.items.size() <= 16) {
                os << "[";
                for (std::size_t i = 0; i < v.items.size(); ++i) {
                    if (i) os << ", ";
                    write_value(os, v.items[i], indent);
                }
                os << "]";
            } else {
                const std::string pad(static_cast<std::size_t>(indent + 1) * 2, ' ');
                os << "[\n";
                for (const auto& it : v.items) {
                    os << pad;
                    if (it.kind == Value::Kind::Block) {
                        os << "{\n";
                        write_fields(os, it, indent + 2);
                        os << pad << "}";
                    } else {
                        write_value(os, it, indent + 1);
                    }
                    os << "\n";
                }
                os << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "]";
            }
            break;
        }
        case Value::Kind::Block:
            os << "{\n";
            write_fields(os, v, indent + 1);
            os << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "}";
            break;
    }
}

}  // namespace detail

inline Value parse_document(const std::string& text) {
    detail::Tokenizer tk{text};
    return detail::parse_block_body(tk, true);
}

inline std::string write_document(const Value& block) {
    std::ostringstream os;
    detail::write_fields(os, block, 0);
    return os.str();
}

/// 17 significant digits: enough for a lossless double round-trip.
inline std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double as_double(const Value& v) {
    if (v.kind != Value::Kind::Scalar) throw ParseError("expected a number");
    try {
        std::size_t used = 0;
        double d = std::stod(v.scalar, &used);
        if (used != v.scalar.size()) throw ParseError("bad number: " + v.scalar);
        return d;
    } catch (const std::exception&) {
        throw ParseError("bad number: " + v.scalar);
    }
}

inline Rational as_rational(const Value& v) {
    if (v.kind != Value::Kind::Scalar) throw ParseError("expected a number");
    return parse_rational(v.scalar);
}

inline std::size_t as_size(const Value& v) {
    double d = as_double(v);
    if (d < 0 || d != std::floor(d)) throw ParseError("expected a nonnegative integer");
    return static_cast<std::size_t>(d);
}

inline bool as_bool(const Value& v) {
    if (v.scalar == "true") return true;
    if (v.scalar == "false") return false;
    throw ParseError("expected true/false, got: " + v.scalar);
}

inline std::vector<double> as_double_vector(const Value& v) {
    if (v.kind != Value::Kind::List) throw ParseError("expected a list of numbers");
    std::vector<double> out;
    for (const auto& it : v.items) out.push_back(as_double(it));
    return out;
}

inline std::vector<Point> as_points(const Value& v) {
    if (v.kind != Value::Kind::List) throw ParseError("expected a list of points");
    std::vector<Point> out;
    for (const auto& it : v.items) {
        if (it.kind == Value::Kind::Scalar)
            out.push_back({as_double(it)});
        else
            out.push_back(as_double_vector(it));
    }
    return out;
}

inline Value from_double_vector(const std::vector<double>& xs) {
    Value v = Value::list();
    for (double x : xs) v.items.push_back(Value::scalar_of(fmt17(x)));
    return v;
}

inline Value from_points(const std::vector<Point>& pts) {
    Value v = Value::list();
    for (const auto& p : pts) v.items.push_back(from_double_vector(p));
    return v;
}

}  // namespace sot::io
