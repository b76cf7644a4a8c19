#include "random_records.hpp"

#include <array>
#include <string>

#include "provdet/rng.hpp"

namespace provdet::testing {

namespace {

constexpr std::array<const char*, 16> kWords = {"return", "the", "value", "of", "list",  "sum",
                                                "given", "each", "item", "a",  "number", "string",
                                                "map",   "key",  "count", "index"};
constexpr std::array<const char*, 9> kNoise = {"<p>", "<br/>", "https://example.org", "www.site.com",
                                               "what", "how", "why?", "TODO", "caf\xc3\xa9"};
constexpr std::array<const char*, 8> kNames = {"compute", "get_value", "getName", "set_x",
                                               "testParse", "is_ok", "merge_all", "walk"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& pool, Rng& rng) {
  return pool[static_cast<std::size_t>(rng.below(N))];
}

std::string docstring(Rng& rng) {
  std::string out;
  const std::size_t words = 1 + static_cast<std::size_t>(rng.below(25));
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) out += ' ';
    out += rng.below(12) == 0 ? pick(kNoise, rng) : pick(kWords, rng);
  }
  if (rng.below(2) == 0) out += '.';
  return out;
}

std::string python_code(Rng& rng) {
  std::string code;
  if (rng.below(6) == 0) code += "# leading comment\n";
  code += std::string("def ") + pick(kNames, rng) + "(a, b=1):";
  if (rng.below(4) == 0) code += "  # sig";
  code += "\n";
  if (rng.below(8) == 0) return code + "    pass\n";
  const std::size_t lines = 1 + static_cast<std::size_t>(rng.below(6));
  for (std::size_t i = 0; i < lines; ++i) {
    switch (rng.below(9)) {
      case 0: code += "    # note " + std::to_string(i) + "\n"; break;
      case 1: code += "    s = \"# not a comment\"  # real one\n"; break;
      case 2: code += "    if a > b:\n        a = b\n"; break;
      case 3: code += "    x = a + b # tail\n"; break;
      case 4: code += "\n"; break;
      case 5: code += "    t = '''doc\n    # inside'''\n"; break;
      case 6: code += "    for i in range(a):\n        b += i   \n"; break;
      case 7: code += "    #\n"; break;
      default: code += "    y = [v for v in b if v]\n"; break;
    }
  }
  code += "    return a\n";
  return code;
}

std::string java_code(Rng& rng) {
  std::string code;
  if (rng.below(5) == 0) code += "/** Doc. */\n";
  code += std::string("int ") + pick(kNames, rng) + "(int a, int b) {";
  if (rng.below(4) == 0) code += " // open";
  code += "\n";
  if (rng.below(8) == 0) return code + "}\n";
  const std::size_t lines = 1 + static_cast<std::size_t>(rng.below(6));
  for (std::size_t i = 0; i < lines; ++i) {
    switch (rng.below(9)) {
      case 0: code += "    // note\n"; break;
      case 1: code += "    String s = \"// not /* a comment\"; /* real */\n"; break;
      case 2: code += "    if (a > b && b > 0) { a = b; }\n"; break;
      case 3: code += "    /* multi\n       line */ a++;\n"; break;
      case 4: code += "\n"; break;
      case 5: code += "    a = a/*x*/+b;\n"; break;
      case 6: code += "    for (int i = 0; i < a; i++) b += i; // loop\n"; break;
      case 7: code += "    char c = '/';\n"; break;
      default: code += "    b = a > 0 ? a : -a;\n"; break;
    }
  }
  code += "    return a;\n}\n";
  return code;
}

}  // namespace

std::vector<FunctionRecord> random_records(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FunctionRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FunctionRecord r;
    r.id = "r" + std::to_string(i);
    r.language = rng.below(2) == 0 ? Language::Python : Language::Java;
    r.docstring = docstring(rng);
    r.code = r.language == Language::Python ? python_code(rng) : java_code(rng);
    r.origin = Origin::Human;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace provdet::testing
