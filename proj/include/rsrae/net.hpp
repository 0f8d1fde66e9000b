#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsrae/tape.hpp"
#include "rsrae/tensor.hpp"

namespace rsrae {

struct DenseLayer {
    Tensor weights;  // out x in
    Tensor bias;     // out
    ActivationSpec activation;

    std::size_t input_width() const { return weights.cols(); }
    std::size_t output_width() const { return weights.rows(); }
    void validate() const;
};

// The robust-subspace layer: a d x D linear map applied to encoder codes.
struct RsrLayer {
    Tensor a;  // d x D

    std::size_t latent_dim() const { return a.rows(); }
    std::size_t code_dim() const { return a.cols(); }
    void validate() const;
};

struct BatchNormState {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;  // weight of the newest batch in the running averages
    double eps = 1e-5;

    static BatchNormState identity(std::size_t width);
    std::size_t width() const { return gamma.size(); }
    void validate() const;
};

enum class ParamRole { Encoder, Rsr, Decoder };

struct ParamRef {
    Tensor* tensor;
    ParamRole role;
    std::string name;
};

struct ConstParamRef {
    const Tensor* tensor;
    ParamRole role;
    std::string name;
};

// Encoder -> RSR layer -> optional row normalization -> decoder. Batch norm,
// when enabled, sits between the affine map and the activation of every layer
// except the decoder output layer.
struct AutoencoderModel {
    std::vector<DenseLayer> encoder;
    RsrLayer rsr;
    std::vector<DenseLayer> decoder;
    bool normalize_latent = false;
    bool batch_norm = false;
    std::vector<BatchNormState> encoder_bn;
    std::vector<BatchNormState> decoder_bn;

    std::size_t input_dim() const { return encoder.front().input_width(); }
    std::size_t code_dim() const { return rsr.code_dim(); }
    std::size_t latent_dim() const { return rsr.latent_dim(); }

    void validate() const;

    // Trainable tensors in a fixed order: encoder layers, A, decoder layers.
    std::vector<ParamRef> parameters();
    std::vector<ConstParamRef> parameters() const;
    std::size_t parameter_count() const;
};

struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> encoder_widths;  // last entry is the code width D
    std::size_t latent_dim = 0;               // d
    std::vector<std::size_t> decoder_widths;  // hidden widths; the output layer back to input_dim is appended
    ActivationSpec activation = ActivationSpec::tanh();
    ActivationSpec output_activation = ActivationSpec::none();
    bool batch_norm = false;
    bool normalize_latent = false;
    bool scale_init = true;  // multiply N(0,1) draws by 1/sqrt(fan_in)

    void validate() const;
};

// Layer widths 32-64-128 | d=2 | 128-64-32-3, leaky ReLU 0.2 on every layer.
ModelSpec swiss_roll_model_spec();
// Dense 32-64-128 | d=10 | 128-64-32-M, tanh, batch norm and latent normalization on.
ModelSpec dense_model_spec(std::size_t input_dim);

AutoencoderModel init_model(const ModelSpec& spec, std::uint64_t seed);

struct ForwardOptions {
    bool training = false;             // batch statistics for batch norm
    bool update_running_stats = true;  // only used when training
    bool track_params = true;          // parameters become tracked tape leaves
};

// Tape handles for one forward pass. `params` is parallel to model.parameters().
struct ModelVars {
    std::vector<Var> params;
    Var input;
    Var code;      // Z = E(X), N x D
    Var latent;    // Z~ = Z A^T, N x d
    Var decoder_input;  // latent, row-normalized when enabled
    Var output;    // X~, N x M
    Var a;         // the RSR matrix leaf
};

ModelVars record_forward(Tape& tape, AutoencoderModel& model, const Tensor& x, const ForwardOptions& opts);

// Encoder only; returns the tape handle of Z. `params` receives the encoder leaves.
Var record_encoder(Tape& tape, AutoencoderModel& model, Var input, const ForwardOptions& opts,
                   std::vector<Var>* params = nullptr);

struct ModelOutputs {
    Tensor code;
    Tensor latent;
    Tensor decoder_input;
    Tensor output;
};

// Inference-mode forward pass (running batch-norm statistics, nothing tracked).
ModelOutputs model_forward(const AutoencoderModel& model, const Tensor& x);

Tensor dense_forward(const DenseLayer& layer, const Tensor& x);
Var record_dense(Tape& tape, Var x, Var weights, Var bias, ActivationSpec act);

Tensor batch_norm_forward(BatchNormState& state, const Tensor& x, bool training);
Var record_batch_norm(Tape& tape, BatchNormState& state, Var x, Var gamma, Var beta, const ForwardOptions& opts);

// Divides each row by its L2 norm; rows with norm below 1e-12 pass through.
Var record_row_normalize(Tape& tape, Var x);

// Flat copy of all parameters in parameters() order, and its inverse.
std::vector<double> flatten_parameters(const AutoencoderModel& model);
void assign_parameters(AutoencoderModel& model, std::span<const double> flat);

void write_model(std::ostream& out, const AutoencoderModel& model);
AutoencoderModel read_model(std::istream& in);
void save_model(const std::string& path, const AutoencoderModel& model);
AutoencoderModel load_model(const std::string& path);

}  // namespace rsrae
