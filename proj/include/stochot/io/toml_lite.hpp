#pragma once

#include <cctype>
#include <string>

#include <json.hpp>

#include "stochot/core.hpp"

namespace stochot::io {

/// Parser for the TOML subset the configs use: `[table]`, `[a.b]`, `[[array]]`,
/// bare or quoted keys, strings, integers, floats, booleans, arrays (may span
/// lines) and inline tables. Produces a json object.
class TomlLite {
public:
    static nlohmann::json parse(const std::string& text) {
        TomlLite p(text);
        return p.document();
    }

private:
    using json = nlohmann::json;
    const std::string& s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;

    explicit TomlLite(const std::string& s) : s_(s) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw InvalidArgument("toml line " + std::to_string(line_) + ": " + what);
    }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }
    char get() {
        const char c = s_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }
    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }
    // whitespace, newlines and comments (inside arrays)
    void skip_all_ws() {
        while (!eof()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n')
                get();
            else if (c == '#')
                skip_comment();
            else
                break;
        }
    }
    void end_of_line() {
        skip_inline_ws();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail("unexpected trailing characters");
        get();
    }

    std::string key_part() {
        skip_inline_ws();
        if (peek() == '"') return basic_string();
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
            k += s_[pos_++];
        if (k.empty()) fail("expected a key");
        skip_inline_ws();
        return k;
    }
    std::vector<std::string> dotted_key() {
        std::vector<std::string> parts{key_part()};
        while (peek() == '.') {
            ++pos_;
            parts.push_back(key_part());
        }
        return parts;
    }

    std::string basic_string() {
        get();  // opening quote
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("unterminated escape");
                const char e = get();
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out += c;
            }
        }
        return out;
    }
    std::string literal_string() {
        get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == '\'') break;
            out += c;
        }
        return out;
    }

    json scalar_token() {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '-' ||
                          peek() == '+' || peek() == '_'))
            tok += s_[pos_++];
        if (tok == "true") return true;
        if (tok == "false") return false;
        if (tok.empty()) fail("expected a value");
        std::string clean;
        for (char c : tok)
            if (c != '_') clean += c;
        const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" || clean == "nan";
        try {
            std::size_t used = 0;
            if (is_float) {
                const double v = std::stod(clean, &used);
                if (used == clean.size()) return v;
            } else {
                const long long v = std::stoll(clean, &used);
                if (used == clean.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail("cannot parse value '" + tok + "'");
    }

    json value() {
        skip_inline_ws();
        const char c = peek();
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') {
            get();
            json arr = json::array();
            skip_all_ws();
            while (peek() != ']') {
                arr.push_back(value());
                skip_all_ws();
                if (peek() == ',') {
                    get();
                    skip_all_ws();
                } else if (peek() != ']') {
                    fail("expected ',' or ']' in array");
                }
            }
            get();
            return arr;
        }
        if (c == '{') {
            get();
            json obj = json::object();
            skip_inline_ws();
            while (peek() != '}') {
                auto keys = dotted_key();
                if (peek() != '=') fail("expected '=' in inline table");
                get();
                insert(obj, keys, value());
                skip_inline_ws();
                if (peek() == ',') {
                    get();
                    skip_inline_ws();
                } else if (peek() != '}') {
                    fail("expected ',' or '}' in inline table");
                }
            }
            get();
            return obj;
        }
        return scalar_token();
    }

    void insert(json& table, const std::vector<std::string>& keys, json v) {
        json* t = &table;
        for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
            json& next = (*t)[keys[k]];
            if (next.is_null()) next = json::object();
            if (!next.is_object()) fail("key '" + keys[k] + "' is not a table");
            t = &next;
        }
        if (t->contains(keys.back())) fail("duplicate key '" + keys.back() + "'");
        (*t)[keys.back()] = std::move(v);
    }

    json* open_table(json& root, const std::vector<std::string>& keys, bool array_item) {
        json* t = &root;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            json& next = (*t)[keys[k]];
            const bool last = k + 1 == keys.size();
            if (last && array_item) {
                if (next.is_null()) next = json::array();
                if (!next.is_array()) fail("'" + keys[k] + "' is not an array of tables");
                next.push_back(json::object());
                return &next.back();
            }
            if (next.is_null()) next = json::object();
            if (next.is_array() && !next.empty() && next.back().is_object()) {
                t = &next.back();
                continue;
            }
            if (!next.is_object()) fail("'" + keys[k] + "' is not a table");
            t = &next;
        }
        return t;
    }

    json document() {
        json root = json::object();
        json* current = &root;
        while (true) {
            skip_all_ws();
            if (eof()) break;
            if (peek() == '[') {
                get();
                const bool array_item = peek() == '[';
                if (array_item) get();
                auto keys = dotted_key();
                if (get() != ']') fail("expected ']'");
                if (array_item && (eof() || get() != ']')) fail("expected ']]'");
                current = open_table(root, keys, array_item);
                end_of_line();
                continue;
            }
            auto keys = dotted_key();
            if (eof() || peek() != '=') fail("expected '='");
            get();
            insert(*current, keys, value());
            end_of_line();
        }
        return root;
    }
};

}  // namespace stochot::io
