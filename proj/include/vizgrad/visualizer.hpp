#pragma once

#include <memory>
#include <vector>

#include "vizgrad/data.hpp"
#include "vizgrad/image.hpp"
#include "vizgrad/params.hpp"

namespace vizgrad {

// The visualization function: realized parameters in, image out, plus the
// reverse pass back to raw parameters. Optimizers only see this interface.
class Visualizer {
public:
    virtual ~Visualizer() = default;

    [[nodiscard]] virtual const params::SchemaPtr& schema() const = 0;

    [[nodiscard]] virtual Image render(const params::RealizedParams& r) const = 0;

    // Gradient wrt raw parameters of sum(cotangent * render(constrain(p))).
    [[nodiscard]] virtual std::vector<double> render_vjp(const params::ParamVector& p, const ImageGradient& cotangent,
                                                         const params::ConstrainOptions& options) const = 0;

    // Non-negative term subtracted from the judge's score (layout overlap).
    [[nodiscard]] virtual double penalty(const params::RealizedParams&) const { return 0.0; }
    [[nodiscard]] virtual std::vector<double> penalty_vjp(const params::ParamVector& p,
                                                          const params::ConstrainOptions&) const {
        return std::vector<double>(p.raw.size(), 0.0);
    }

    // Same visualization over a different dataset; used for bootstrap
    // replicates. Returns nullptr when the visualizer is data independent.
    [[nodiscard]] virtual std::unique_ptr<Visualizer> with_dataset(const data::Dataset&) const { return nullptr; }
};

}  // namespace vizgrad
