#include "rsrae/losses.hpp"

#include <cmath>

#include "rsrae/error.hpp"

namespace rsrae {

namespace {

void require_power(int p, const char* what) {
    if (p != 1 && p != 2) throw ConfigError(std::string(what) + ": power must be 1 or 2, got " + std::to_string(p));
}

Var sum_of_row_powers(Tape& tape, Var residual, int p) {
    return p == 1 ? tape.sum(tape.row_norm(residual)) : tape.sum(tape.square(residual));
}

}  // namespace

Var record_loss_ae(Tape& tape, Var x, Var x_rec, int p) {
    require_power(p, "loss_ae");
    if (tape.value(x).shape() != tape.value(x_rec).shape()) {
        throw ShapeError("loss_ae: " + shape_string(tape.value(x).shape()) + " vs " +
                         shape_string(tape.value(x_rec).shape()));
    }
    return sum_of_row_powers(tape, tape.sub(x, x_rec), p);
}

Var record_loss_rsr1(Tape& tape, Var z, Var a, int q) {
    require_power(q, "loss_rsr1");
    const Tensor& zv = tape.value(z);
    const Tensor& av = tape.value(a);
    if (zv.rank() != 2 || av.rank() != 2 || zv.cols() != av.cols()) {
        throw ShapeError("loss_rsr1: codes " + shape_string(zv.shape()) + " vs A " + shape_string(av.shape()));
    }
    Var projected = tape.matmul(tape.matmul(z, tape.transpose(a)), a);
    return sum_of_row_powers(tape, tape.sub(z, projected), q);
}

Var record_loss_rsr2(Tape& tape, Var a) {
    const Tensor& av = tape.value(a);
    if (av.rank() != 2) throw ShapeError("loss_rsr2: A must be a matrix, got " + shape_string(av.shape()));
    const std::size_t d = av.rows();  // av dangles once the tape grows
    Var gram = tape.matmul(a, tape.transpose(a));
    return tape.sum(tape.square(tape.sub(gram, tape.constant(Tensor::identity(d)))));
}

double loss_ae(const Tensor& x, const Tensor& x_rec, int p) {
    Tape tape;
    return tape.value(record_loss_ae(tape, tape.constant(x), tape.constant(x_rec), p)).item();
}

double loss_rsr1(const Tensor& z, const Tensor& a, int q) {
    Tape tape;
    return tape.value(record_loss_rsr1(tape, tape.constant(z), tape.constant(a), q)).item();
}

double loss_rsr2(const Tensor& a) {
    Tape tape;
    return tape.value(record_loss_rsr2(tape, tape.constant(a))).item();
}

LossBreakdown loss_combined(const Tensor& x, const ModelOutputs& outputs, const Tensor& a,
                            std::optional<LossWeights> weights) {
    LossBreakdown out;
    if (weights) {
        if (!(weights->lambda1 >= 0.0) || !(weights->lambda2 >= 0.0)) {
            throw ConfigError("loss weights must be nonnegative");
        }
        out.lambda1 = weights->lambda1;
        out.lambda2 = weights->lambda2;
    }
    out.l_ae = loss_ae(x, outputs.output, 1);
    out.l_rsr1 = loss_rsr1(outputs.code, a, 1);
    out.l_rsr2 = loss_rsr2(a);
    out.combined = out.l_ae + out.lambda1 * out.l_rsr1 + out.lambda2 * out.l_rsr2;
    return out;
}

std::vector<double> anomaly_scores(const Tensor& x, const Tensor& x_rec) {
    if (x.shape() != x_rec.shape() || x.rank() != 2) {
        throw ShapeError("anomaly_scores: " + shape_string(x.shape()) + " vs " + shape_string(x_rec.shape()));
    }
    Tape tape;
    Var norms = tape.row_norm(tape.sub(tape.constant(x), tape.constant(x_rec)));
    return tape.value(norms).values();
}

}  // namespace rsrae
