// Runs every property suite once and prints one PASS/FAIL line per criterion.
#include "zeroshot/verify.hpp"

#include <cstdio>
#include <string>
#include <vector>

using namespace zsrl;

namespace {

struct Criterion {
    int id;
    const char* suite;
    const char* title;
    double time_limit_s;  // 0: none
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "smb", "successor-measure suite", 10.0},
        {2, "sf", "successor-feature suite", 30.0},
        {3, "gpi", "GPI suite", 0.0},
        {4, "theorem2", "zero-shot gap bound suite", 120.0},
        {5, "eq31", "reward-perturbation bound suite", 0.0},
        {6, "fb-recon", "forward-backward suite", 0.0},
        {7, "psm-affine", "proto successor measure suite", 0.0},
        {8, "hilp-path", "Hilbert / goal-conditioned suite", 0.0},
        {9, "harness", "harness suite", 0.0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        SuiteResult r;
        try {
            r = run_suite(c.suite);
        } catch (const std::exception& e) {
            r.suite = c.suite;
            r.expect(false, std::string("exception: ") + e.what());
        }
        std::string note = r.summary;
        if (c.time_limit_s > 0 && r.seconds >= c.time_limit_s) {
            r.pass = false;
            note += "; runtime " + std::to_string(r.seconds) + " s exceeds " + std::to_string(c.time_limit_s) + " s";
        }
        std::printf("%s criterion %d (%s) [%s, %.2f s]: %s\n", r.pass ? "PASS" : "FAIL", c.id, c.title, c.suite,
                    r.seconds, note.c_str());
        for (const auto& f : r.failures) std::printf("    %s\n", f.c_str());
        std::fflush(stdout);
        if (!r.pass) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
