#pragma once

#include <cstdint>
#include <map>
#include <string>

// Analytic FLOPs accounting. Conv-style ops report 2*k^2*Cin*Cout*Hout*Wout
// into the currently active stage; wall-clock timing lives in eval.
namespace ddvc::prof {

struct Counters {
    std::map<std::string, uint64_t> flops_by_stage;
    uint64_t si_gen_calls = 0;  // bumped by every si-gen entry point
    uint64_t total() const {
        uint64_t t = 0;
        for (auto& [k, v] : flops_by_stage) t += v;
        return t;
    }
};

void enable(bool on);
bool enabled();
void reset();
Counters snapshot();

void add_flops(uint64_t n);
void mark_si_gen();

// RAII stage tag; nested scopes override the stage for their extent.
class StageScope {
  public:
    explicit StageScope(std::string stage);
    ~StageScope();
    StageScope(const StageScope&) = delete;
    StageScope& operator=(const StageScope&) = delete;

  private:
    std::string prev_;
};

std::string current_stage();

}  // namespace ddvc::prof
