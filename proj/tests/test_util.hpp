#pragma once

// Shared test helpers: the central finite-difference gradient oracle and a
// few corpus builders.

#include <cmath>
#include <functional>
#include <vector>

#include "advlog/corpus.hpp"
#include "advlog/tensor.hpp"

namespace advtest {

using advlog::tc::Tensor;

// Checks analytic gradients of `loss_fn` w.r.t. every entry of every param
// against central finite differences. Returns the worst relative error.
inline double grad_check(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor>& params, double h = 1e-5) {
    auto loss = loss_fn();
    advlog::tc::zero_grads(params);
    advlog::tc::backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) {
        p->ensure_grad();
        analytic.push_back(p->grad);
    }

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (size_t i = 0; i < p->size(); ++i) {
            double keep = p->val[i];
            p->val[i] = keep + h;
            double up = loss_fn()->val[0];
            p->val[i] = keep - h;
            double down = loss_fn()->val[0];
            p->val[i] = keep;
            double numeric = (up - down) / (2.0 * h);
            double denom = std::max({std::fabs(numeric), std::fabs(analytic[pi][i]), 1e-8});
            worst = std::max(worst, std::fabs(numeric - analytic[pi][i]) / denom);
        }
    }
    return worst;
}

inline advlog::Corpus tiny_corpus() {
    advlog::Corpus c;
    const char* rows[] = {
        "1,U1@D,U1@D,C1,C2,Krb,Network,LogOn,Success",
        "2,U2@D,U2@D,C3,C2,Krb,Network,LogOn,Success",
        "3,U1@D,U1@D,C1,C4,NTLM,Service,LogOff,Fail",
        "4,U3@D,U3@D,C5,C2,Krb,Network,LogOn,Success",
        "5,U2@D,U2@D,C3,C4,Krb,Batch,TGS,Success",
    };
    for (auto* r : rows) c.lines.push_back(advlog::parse_log_line(r));
    return c;
}

}  // namespace advtest
