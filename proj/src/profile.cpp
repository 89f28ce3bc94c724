#include "ddvc/profile.hpp"

namespace ddvc::prof {

namespace {
bool g_enabled = false;
Counters g_counters;
std::string g_stage = "other";
}  // namespace

void enable(bool on) { g_enabled = on; }
bool enabled() { return g_enabled; }
void reset() { g_counters = Counters{}; }
Counters snapshot() { return g_counters; }

void add_flops(uint64_t n) {
    if (g_enabled) g_counters.flops_by_stage[g_stage] += n;
}

void mark_si_gen() {
    if (g_enabled) ++g_counters.si_gen_calls;
}

StageScope::StageScope(std::string stage) : prev_(g_stage) { g_stage = std::move(stage); }
StageScope::~StageScope() { g_stage = prev_; }

std::string current_stage() { return g_stage; }

}  // namespace ddvc::prof
