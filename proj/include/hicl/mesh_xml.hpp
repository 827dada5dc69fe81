#pragma once

// Reader for the NLM descriptor XML. Only DescriptorRecord ->
// {DescriptorUI, DescriptorName/String, TreeNumberList/TreeNumber} are
// consumed; everything else (ConceptList, qualifiers, pharmacological
// actions with their nested DescriptorUI elements) is skipped by matching
// full element paths, not bare tag names.

#include <istream>
#include <string>
#include <vector>

#include "hicl/mesh.hpp"

namespace hicl {
namespace detail {

class XmlReader {
 public:
  enum class Kind { StartElement, EndElement, Text, End };
  struct Event {
    Kind kind;
    std::string value;  // element name or decoded text
  };

  explicit XmlReader(std::istream& in) : in_(in) {}

  size_t line() const { return line_; }

  Event next() {
    if (!pending_end_.empty()) {
      Event ev{Kind::EndElement, pending_end_};
      pending_end_.clear();
      return ev;
    }
    int c = peek();
    if (c == EOF) {
      if (!stack_.empty())
        fail("unexpected end of input inside element '" + stack_.back() + "'");
      return {Kind::End, ""};
    }
    if (c != '<') return read_text();
    get();  // consume '<'
    c = peek();
    if (c == '!') return read_bang();
    if (c == '?') {
      skip_until("?>");
      return next();
    }
    if (c == '/') return read_end_tag();
    return read_start_tag();
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("XML line " + std::to_string(line_) + ": " + msg);
  }

  int peek() { return in_.peek(); }

  int get() {
    const int c = in_.get();
    if (c == '\n') ++line_;
    return c;
  }

  void expect(char want) {
    const int c = get();
    if (c != want)
      fail(std::string("expected '") + want + "', got " +
           (c == EOF ? std::string("end of input") : std::string(1, static_cast<char>(c))));
  }

  void skip_until(std::string_view terminator) {
    size_t matched = 0;
    while (matched < terminator.size()) {
      const int c = get();
      if (c == EOF) fail("unexpected end of input while scanning for '" + std::string(terminator) + "'");
      matched = (static_cast<char>(c) == terminator[matched]) ? matched + 1
                : (static_cast<char>(c) == terminator[0] ? 1 : 0);
    }
  }

  static bool is_name_char(int c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.' || c == ':';
  }

  std::string read_name() {
    std::string name;
    while (is_name_char(peek())) name += static_cast<char>(get());
    if (name.empty()) fail("expected element name");
    return name;
  }

  void skip_whitespace() {
    int c = peek();
    while (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      get();
      c = peek();
    }
  }

  Event read_bang() {
    get();  // '!'
    if (peek() == '-') {
      // comment
      expect('-');
      expect('-');
      skip_until("-->");
      return next();
    }
    std::string keyword;
    while (is_name_char(peek())) keyword += static_cast<char>(get());
    if (keyword.empty() && peek() == '[') {
      get();
      std::string kw2;
      while (is_name_char(peek())) kw2 += static_cast<char>(get());
      if (kw2 == "CDATA") {
        expect('[');
        return read_cdata();
      }
      fail("unrecognized markup '<![" + kw2 + "'");
    }
    if (keyword == "DOCTYPE") {
      // skip, honoring an optional internal subset in brackets
      int depth = 0;
      while (true) {
        const int c = get();
        if (c == EOF) fail("unexpected end of input inside DOCTYPE");
        if (c == '[') ++depth;
        else if (c == ']') --depth;
        else if (c == '>' && depth <= 0) break;
      }
      return next();
    }
    fail("unrecognized markup '<!" + keyword + "'");
  }

  Event read_cdata() {
    std::string text;
    while (true) {
      const int c = get();
      if (c == EOF) fail("unexpected end of input inside CDATA");
      text += static_cast<char>(c);
      if (text.size() >= 3 && text.compare(text.size() - 3, 3, "]]>") == 0) {
        text.erase(text.size() - 3);
        return {Kind::Text, text};
      }
    }
  }

  Event read_start_tag() {
    const std::string name = read_name();
    // attributes are not consumed by this format; skip them, respecting quotes
    bool self_closing = false;
    while (true) {
      skip_whitespace();
      const int c = get();
      if (c == EOF) fail("unexpected end of input inside tag '" + name + "'");
      if (c == '>') break;
      if (c == '/') {
        expect('>');
        self_closing = true;
        break;
      }
      if (c == '"' || c == '\'') {
        const char quote = static_cast<char>(c);
        int q;
        do {
          q = get();
          if (q == EOF) fail("unterminated attribute value in tag '" + name + "'");
        } while (q != quote);
      }
    }
    if (self_closing)
      pending_end_ = name;
    else
      stack_.push_back(name);
    return {Kind::StartElement, name};
  }

  Event read_end_tag() {
    get();  // '/'
    const std::string name = read_name();
    skip_whitespace();
    expect('>');
    if (stack_.empty()) fail("closing tag '" + name + "' with no open element");
    if (stack_.back() != name)
      fail("closing tag '" + name + "' does not match open element '" + stack_.back() + "'");
    stack_.pop_back();
    return {Kind::EndElement, name};
  }

  Event read_text() {
    std::string text;
    while (true) {
      const int c = peek();
      if (c == EOF || c == '<') break;
      get();
      if (c == '&') {
        text += read_entity();
      } else {
        text += static_cast<char>(c);
      }
    }
    if (stack_.empty() && !trim(text).empty())
      fail("text outside of any element");
    return {Kind::Text, text};
  }

  std::string read_entity() {
    std::string name;
    while (true) {
      const int c = get();
      if (c == EOF) fail("unterminated entity reference");
      if (c == ';') break;
      name += static_cast<char>(c);
      if (name.size() > 10) fail("unterminated entity reference '&" + name + "'");
    }
    if (name == "amp") return "&";
    if (name == "lt") return "<";
    if (name == "gt") return ">";
    if (name == "quot") return "\"";
    if (name == "apos") return "'";
    if (!name.empty() && name[0] == '#') {
      const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
      unsigned long code = 0;
      try {
        code = std::stoul(name.substr(hex ? 2 : 1), nullptr, hex ? 16 : 10);
      } catch (const std::exception&) {
        fail("bad numeric character reference '&" + name + ";'");
      }
      if (code == 0 || code > 0x10FFFF) fail("character reference out of range '&" + name + ";'");
      // encode as UTF-8
      std::string out;
      if (code < 0x80) {
        out += static_cast<char>(code);
      } else if (code < 0x800) {
        out += static_cast<char>(0xC0 | (code >> 6));
        out += static_cast<char>(0x80 | (code & 0x3F));
      } else if (code < 0x10000) {
        out += static_cast<char>(0xE0 | (code >> 12));
        out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (code & 0x3F));
      } else {
        out += static_cast<char>(0xF0 | (code >> 18));
        out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (code & 0x3F));
      }
      return out;
    }
    fail("unknown entity '&" + name + ";'");
  }

  std::istream& in_;
  size_t line_ = 1;
  std::vector<std::string> stack_;
  std::string pending_end_;
};

}  // namespace detail

inline MeshHierarchy parse_descriptors_xml(std::istream& in) {
  detail::XmlReader reader(in);
  MeshHierarchy h;
  ParseStats stats;

  std::vector<std::string> path;
  bool in_record = false;
  size_t record_line = 0;
  std::string ui, name;
  std::vector<std::string> trees;
  std::string* capture = nullptr;

  auto path_is = [&](std::initializer_list<const char*> suffix) {
    if (path.size() < suffix.size()) return false;
    size_t i = path.size() - suffix.size();
    for (const char* want : suffix)
      if (path[i++] != want) return false;
    return true;
  };

  while (true) {
    const auto ev = reader.next();
    if (ev.kind == detail::XmlReader::Kind::End) break;
    switch (ev.kind) {
      case detail::XmlReader::Kind::StartElement:
        path.push_back(ev.value);
        capture = nullptr;
        if (ev.value == "DescriptorRecord" && !in_record) {
          in_record = true;
          record_line = reader.line();
          ui.clear();
          name.clear();
          trees.clear();
        } else if (in_record) {
          if (path_is({"DescriptorRecord", "DescriptorUI"})) {
            capture = &ui;
          } else if (path_is({"DescriptorRecord", "DescriptorName", "String"})) {
            capture = &name;
          } else if (path_is({"DescriptorRecord", "TreeNumberList", "TreeNumber"})) {
            trees.emplace_back();
            capture = &trees.back();
          }
        }
        break;
      case detail::XmlReader::Kind::Text:
        if (capture != nullptr) *capture += ev.value;
        break;
      case detail::XmlReader::Kind::EndElement:
        capture = nullptr;
        if (ev.value == "DescriptorRecord" && in_record) {
          in_record = false;
          if (trim(ui).empty())
            throw ParseError("XML line " + std::to_string(reader.line()) +
                             ": DescriptorRecord (starting near line " + std::to_string(record_line) +
                             ") has no DescriptorUI");
          MeshDescriptor d;
          d.ui = trim(ui);
          d.name = trim(name);
          bool any_tree = false;
          for (const std::string& t : trees) {
            if (trim(t).empty()) continue;
            d.tree_numbers.push_back(TreeNumber::parse(t));
            any_tree = true;
          }
          if (!any_tree) {
            ++stats.skipped_no_tree_numbers;
          } else {
            h.add(std::move(d));
            ++stats.descriptors;
          }
        }
        if (!path.empty()) path.pop_back();
        break;
      case detail::XmlReader::Kind::End:
        break;
    }
  }
  h.set_stats(stats);
  return h;
}

enum class MeshFormat { xml, tsv };

inline MeshFormat mesh_format_from_string(const std::string& s) {
  if (s == "xml") return MeshFormat::xml;
  if (s == "tsv") return MeshFormat::tsv;
  throw ConfigError("unknown mesh format '" + s + "' (expected 'xml' or 'tsv')");
}

inline std::string to_string(MeshFormat f) { return f == MeshFormat::xml ? "xml" : "tsv"; }

inline MeshHierarchy parse_descriptors(std::istream& in, MeshFormat format) {
  return format == MeshFormat::xml ? parse_descriptors_xml(in) : parse_descriptors_tsv(in);
}

}  // namespace hicl
