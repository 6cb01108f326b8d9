#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace profcast {

namespace detail {

inline std::vector<char32_t> utf8_decode(const std::string& s) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      len = 2;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      len = 3;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      len = 4;
    } else {
      cp = 0xfffd;  // stray continuation byte
    }
    if (i + len > s.size()) {
      out.push_back(0xfffd);
      break;
    }
    for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

struct Composition {
  char32_t base;
  char32_t mark;
  char32_t composed;
};

// Latin letters + the combining diacritics that occur in country and economy
// names. Covers the Latin-1 Supplement and Latin Extended-A precompositions.
inline const Composition* composition_table(std::size_t& n) {
  static const Composition kTable[] = {
      {U'A', 0x300, 0xC0}, {U'A', 0x301, 0xC1}, {U'A', 0x302, 0xC2}, {U'A', 0x303, 0xC3},
      {U'A', 0x308, 0xC4}, {U'A', 0x30A, 0xC5}, {U'A', 0x304, 0x100}, {U'A', 0x306, 0x102},
      {U'A', 0x328, 0x104},
      {U'C', 0x327, 0xC7}, {U'C', 0x301, 0x106}, {U'C', 0x30C, 0x10C},
      {U'D', 0x30C, 0x10E},
      {U'E', 0x300, 0xC8}, {U'E', 0x301, 0xC9}, {U'E', 0x302, 0xCA}, {U'E', 0x308, 0xCB},
      {U'E', 0x304, 0x112}, {U'E', 0x306, 0x114}, {U'E', 0x307, 0x116}, {U'E', 0x328, 0x118},
      {U'E', 0x30C, 0x11A},
      {U'G', 0x306, 0x11E}, {U'G', 0x327, 0x122},
      {U'I', 0x300, 0xCC}, {U'I', 0x301, 0xCD}, {U'I', 0x302, 0xCE}, {U'I', 0x308, 0xCF},
      {U'I', 0x304, 0x12A}, {U'I', 0x328, 0x12E},
      {U'L', 0x301, 0x139}, {U'L', 0x30C, 0x13D},
      {U'N', 0x303, 0xD1}, {U'N', 0x301, 0x143}, {U'N', 0x30C, 0x147},
      {U'O', 0x300, 0xD2}, {U'O', 0x301, 0xD3}, {U'O', 0x302, 0xD4}, {U'O', 0x303, 0xD5},
      {U'O', 0x308, 0xD6}, {U'O', 0x304, 0x14C}, {U'O', 0x30B, 0x150},
      {U'R', 0x301, 0x154}, {U'R', 0x30C, 0x158},
      {U'S', 0x301, 0x15A}, {U'S', 0x327, 0x15E}, {U'S', 0x30C, 0x160},
      {U'T', 0x327, 0x162}, {U'T', 0x30C, 0x164},
      {U'U', 0x300, 0xD9}, {U'U', 0x301, 0xDA}, {U'U', 0x302, 0xDB}, {U'U', 0x308, 0xDC},
      {U'U', 0x304, 0x16A}, {U'U', 0x30A, 0x16E}, {U'U', 0x30B, 0x170},
      {U'Y', 0x301, 0xDD}, {U'Y', 0x308, 0x178},
      {U'Z', 0x301, 0x179}, {U'Z', 0x307, 0x17B}, {U'Z', 0x30C, 0x17D},
      {U'a', 0x300, 0xE0}, {U'a', 0x301, 0xE1}, {U'a', 0x302, 0xE2}, {U'a', 0x303, 0xE3},
      {U'a', 0x308, 0xE4}, {U'a', 0x30A, 0xE5}, {U'a', 0x304, 0x101}, {U'a', 0x306, 0x103},
      {U'a', 0x328, 0x105},
      {U'c', 0x327, 0xE7}, {U'c', 0x301, 0x107}, {U'c', 0x30C, 0x10D},
      {U'd', 0x30C, 0x10F},
      {U'e', 0x300, 0xE8}, {U'e', 0x301, 0xE9}, {U'e', 0x302, 0xEA}, {U'e', 0x308, 0xEB},
      {U'e', 0x304, 0x113}, {U'e', 0x306, 0x115}, {U'e', 0x307, 0x117}, {U'e', 0x328, 0x119},
      {U'e', 0x30C, 0x11B},
      {U'g', 0x306, 0x11F}, {U'g', 0x327, 0x123},
      {U'i', 0x300, 0xEC}, {U'i', 0x301, 0xED}, {U'i', 0x302, 0xEE}, {U'i', 0x308, 0xEF},
      {U'i', 0x304, 0x12B}, {U'i', 0x328, 0x12F},
      {U'l', 0x301, 0x13A}, {U'l', 0x30C, 0x13E},
      {U'n', 0x303, 0xF1}, {U'n', 0x301, 0x144}, {U'n', 0x30C, 0x148},
      {U'o', 0x300, 0xF2}, {U'o', 0x301, 0xF3}, {U'o', 0x302, 0xF4}, {U'o', 0x303, 0xF5},
      {U'o', 0x308, 0xF6}, {U'o', 0x304, 0x14D}, {U'o', 0x30B, 0x151},
      {U'r', 0x301, 0x155}, {U'r', 0x30C, 0x159},
      {U's', 0x301, 0x15B}, {U's', 0x327, 0x15F}, {U's', 0x30C, 0x161},
      {U't', 0x327, 0x163}, {U't', 0x30C, 0x165},
      {U'u', 0x300, 0xF9}, {U'u', 0x301, 0xFA}, {U'u', 0x302, 0xFB}, {U'u', 0x308, 0xFC},
      {U'u', 0x304, 0x16B}, {U'u', 0x30A, 0x16F}, {U'u', 0x30B, 0x171},
      {U'y', 0x301, 0xFD}, {U'y', 0x308, 0xFF},
      {U'z', 0x301, 0x17A}, {U'z', 0x307, 0x17C}, {U'z', 0x30C, 0x17E},
  };
  n = sizeof(kTable) / sizeof(kTable[0]);
  return kTable;
}

inline bool compose_pair(char32_t base, char32_t mark, char32_t& out) {
  std::size_t n = 0;
  const Composition* t = composition_table(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i].base == base && t[i].mark == mark) {
      out = t[i].composed;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Trim ASCII whitespace and compose combining diacritics onto Latin base
// letters (NFC over the range that occurs in country identifiers).
inline std::string canonical_id(const std::string& raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && (raw[b] == ' ' || raw[b] == '\t' || raw[b] == '\r' || raw[b] == '\n')) ++b;
  while (e > b && (raw[e - 1] == ' ' || raw[e - 1] == '\t' || raw[e - 1] == '\r' || raw[e - 1] == '\n')) --e;
  auto cps = detail::utf8_decode(raw.substr(b, e - b));

  std::vector<char32_t> composed;
  composed.reserve(cps.size());
  for (char32_t cp : cps) {
    char32_t merged;
    if (!composed.empty() && cp >= 0x300 && cp <= 0x328 &&
        detail::compose_pair(composed.back(), cp, merged)) {
      composed.back() = merged;
    } else {
      composed.push_back(cp);
    }
  }
  std::string out;
  out.reserve(raw.size());
  for (char32_t cp : composed) detail::utf8_append(out, cp);
  return out;
}

}  // namespace profcast
