#include "fasids/payload_analyzer.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <cctype>

namespace fasids {

namespace {

using detail::ifind;
using detail::to_lower;

bool is_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

bool is_alpha(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool is_tag_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == ':' || c == '_';
}

bool is_raw_text_element(std::string_view tag) {
    return tag == "script" || tag == "style";
}

} // namespace

const Attribute* TagEvent::attribute(std::string_view name) const {
    for (const auto& a : attributes) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

bool looks_binary(std::string_view body) {
    auto starts = [&](std::string_view magic) { return body.substr(0, magic.size()) == magic; };
    using namespace std::string_view_literals;
    if (starts("\xFF\xD8\xFF"sv) || starts("\x89PNG"sv) || starts("GIF87a"sv) || starts("GIF89a"sv) ||
        starts("\x00\x00\x01\x00"sv)) {
        return true;
    }
    if (starts("RIFF"sv) && body.substr(8, 4) == "WEBP"sv) return true;
    auto head = body.substr(0, 512);
    return head.find('\0') != std::string_view::npos;
}

bool has_javascript_scheme(std::string_view value, std::size_t* payload_start) {
    static constexpr std::string_view scheme = "javascript:";
    std::size_t matched = 0;
    for (std::size_t i = 0; i < value.size(); ++i) {
        auto c = static_cast<unsigned char>(value[i]);
        if (c <= 0x20 || c == 0x7F) continue;
        if (detail::lower(static_cast<char>(c)) != scheme[matched]) return false;
        if (++matched == scheme.size()) {
            if (payload_start) *payload_start = i + 1;
            return true;
        }
    }
    return false;
}

TokenizeResult tokenize_html(std::string_view body) {
    TokenizeResult out;
    if (looks_binary(body)) {
        out.binary = true;
        return out;
    }

    const std::size_t n = body.size();
    std::size_t pos = 0;
    while (pos < n) {
        auto lt = body.find('<', pos);
        if (lt == std::string_view::npos || lt + 1 >= n) break;
        char next = body[lt + 1];

        if (body.substr(lt, 4) == "<!--") {
            auto end = body.find("-->", lt + 4);
            if (end == std::string_view::npos) {
                out.diagnostics.push_back("offset " + std::to_string(lt) + ": unterminated comment");
                break;
            }
            pos = end + 3;
            continue;
        }
        if (next == '!' || next == '?' || next == '/') {
            auto end = body.find('>', lt + 1);
            if (end == std::string_view::npos) break;
            pos = end + 1;
            continue;
        }
        if (!is_alpha(next)) {
            pos = lt + 1;
            continue;
        }

        TagEvent ev;
        ev.byte_offset = lt;
        std::size_t i = lt + 1;
        while (i < n && is_tag_name_char(body[i])) ++i;
        ev.tag = to_lower(body.substr(lt + 1, i - lt - 1));

        bool closed = false;
        bool broken = false;
        while (i < n) {
            while (i < n && (is_ws(body[i]) || body[i] == '/')) ++i;
            if (i >= n) break;
            if (body[i] == '>') {
                closed = true;
                ++i;
                break;
            }
            auto name_start = i;
            while (i < n && !is_ws(body[i]) && body[i] != '=' && body[i] != '>' &&
                   (body[i] != '/' || i == name_start)) {
                ++i;
            }
            Attribute attr;
            attr.name = to_lower(body.substr(name_start, i - name_start));
            while (i < n && is_ws(body[i])) ++i;
            if (i < n && body[i] == '=') {
                ++i;
                while (i < n && is_ws(body[i])) ++i;
                if (i < n && (body[i] == '"' || body[i] == '\'')) {
                    char quote = body[i];
                    auto close = body.find(quote, i + 1);
                    if (close == std::string_view::npos) {
                        broken = true;
                        break;
                    }
                    attr.value_offset = i + 1;
                    attr.raw_value = std::string(body.substr(i + 1, close - i - 1));
                    i = close + 1;
                } else {
                    auto start = i;
                    while (i < n && !is_ws(body[i]) && body[i] != '>') ++i;
                    attr.value_offset = start;
                    attr.raw_value = std::string(body.substr(start, i - start));
                }
            } else {
                attr.value_offset = i;
            }
            if (ev.attribute(attr.name)) {
                out.diagnostics.push_back("offset " + std::to_string(lt) + ": duplicate attribute '" + attr.name +
                                          "' on <" + ev.tag + ">, first kept");
                continue;
            }
            ev.attributes.push_back(std::move(attr));
        }
        if (!closed || broken) {
            out.diagnostics.push_back("offset " + std::to_string(lt) + ": unterminated <" + ev.tag + "> tag dropped");
            break;
        }
        ev.end_offset = i;
        pos = i;

        if (is_raw_text_element(ev.tag)) {
            auto close = ifind(body, "</" + ev.tag, pos);
            if (close == std::string_view::npos) {
                out.diagnostics.push_back("offset " + std::to_string(lt) + ": <" + ev.tag + "> never closed");
                ev.content = std::make_pair(pos, n);
                pos = n;
            } else {
                ev.content = std::make_pair(pos, close);
                auto gt = body.find('>', close);
                pos = gt == std::string_view::npos ? n : gt + 1;
            }
        }
        out.events.push_back(std::move(ev));
    }
    return out;
}

} // namespace fasids
