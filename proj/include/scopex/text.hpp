#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scopex {

// Canonical text normalization used for all content identities: lowercase
// ASCII, runs of whitespace collapsed to a single space, ends trimmed.
std::string normalize(std::string_view text);

// FNV-1a over bytes; the stable identity hash behind method ids, question
// ids, and knowledge-node keys.
std::uint64_t fnv1a64(std::string_view bytes);

// fnv1a64 rendered as 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

// Identity of a question/label: hex64(fnv1a64(normalize(text))).
std::string text_key(std::string_view text);

std::string trim(std::string_view text);

// Non-empty trimmed lines, in order.
std::vector<std::string> split_lines(std::string_view text);

// Replaces every "{name}" placeholder with vars.at(name); unknown
// placeholders are left verbatim.
std::string render_placeholders(std::string_view tmpl,
                                const std::map<std::string, std::string>& vars);

// Deterministic short formatting for doubles embedded in human-readable
// decision strings ("%.6g").
std::string fmt_double(double value);

// SplitMix64 step; drives the scripted backend's embedding expansion.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace scopex
