#pragma once

#include "zeroshot/bench.hpp"

#include <memory>
#include <string>

namespace zsrl {

/// Versioned JSON text format for trained models.  Doubles are written in
/// shortest round-trip form, so load(dump(m)) is bit-identical.
constexpr int kModelFormatVersion = 1;

std::string dump_fb_model(const FbModel& m);
FbModel parse_fb_model(const std::string& text);

std::string dump_hilbert(const HilbertEmbedding& e);
HilbertEmbedding parse_hilbert(const std::string& text);

std::string dump_psm_model(const PsmModel& m);
PsmModel parse_psm_model(const std::string& text);

std::string dump_usf_model(const UsfModel& m);
UsfModel parse_usf_model(const std::string& text);

/// Whole agents: method, config, mdp and trained state.
std::string dump_agent(const ZeroShotAgent& agent);
std::unique_ptr<ZeroShotAgent> parse_agent(const std::string& text);
void save_agent(const ZeroShotAgent& agent, const std::string& path);
std::unique_ptr<ZeroShotAgent> load_agent(const std::string& path);

}  // namespace zsrl
