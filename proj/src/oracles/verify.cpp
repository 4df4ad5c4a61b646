#include "oracles/verify.hpp"

#include <algorithm>

#include "gcal/format.hpp"
#include "oracles/oracles.hpp"

namespace gcal::oracle {

std::vector<SuiteResult> run_verify_suites() {
    std::vector<SuiteResult> out;

    {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) worst = std::max(worst, check_loss_gradient(1000 + s).max_rel_error);
        for (std::uint64_t s = 0; s < 5; ++s) worst = std::max(worst, check_encoder_gradient(2000 + s).max_rel_error);
        out.push_back({"gradient", worst < 1e-4, "max relative error " + format_double(worst)});
    }
    {
        int violations = 0;
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 30; ++s) {
            const auto c = check_two_approx(3000 + s);
            if (c.greedy_radius > 2.0 * c.optimal_radius + 1e-12) ++violations;
            if (c.optimal_radius > 0.0) worst = std::max(worst, c.greedy_radius / c.optimal_radius);
        }
        out.push_back({"two_approx", violations == 0,
                       std::to_string(violations) + " violations, worst ratio " + format_double(worst)});
    }
    {
        std::string failure;
        for (std::uint64_t s = 0; s < 10 && failure.empty(); ++s) {
            Rng rng(4000 + s);
            SynthSpec spec;
            spec.n_patients = 1 + static_cast<int>(rng.below(5));
            spec.volumes_per_patient = 1 + static_cast<int>(rng.below(3));
            spec.slices_per_volume = 2 + static_cast<int>(rng.below(5));
            spec.height = 2;
            spec.width = 2;
            spec.seed = rng.bits();
            const auto data = generate_synthetic(spec);
            for (const char* g : {"", "slice", "volume,patient", "slice,volume,patient"}) {
                const auto groups = GroupSet::parse(g);
                const std::size_t width = tuple_width(groups);
                const auto plan = build_epoch(data.index, groups, width * (1 + rng.below(3)), rng.bits());
                if (auto err = check_epoch(data.index, groups, plan)) {
                    failure = *err + " (seed " + std::to_string(4000 + s) + ", groups " + groups.str() + ")";
                    break;
                }
            }
        }
        out.push_back({"sampler", failure.empty(), failure.empty() ? "all invariants hold" : failure});
    }
    return out;
}

}  // namespace gcal::oracle
