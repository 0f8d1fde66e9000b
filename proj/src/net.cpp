#include "rsrae/net.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rsrae/error.hpp"
#include "rsrae/rng.hpp"

namespace rsrae {

namespace {

constexpr double kLatentNormFloor = 1e-12;

void check_layer_chain(const std::vector<DenseLayer>& layers, std::size_t in, const char* what) {
    if (layers.empty()) throw ShapeError(std::string(what) + " has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].validate();
        if (layers[i].input_width() != in) {
            throw ShapeError(std::string(what) + " layer " + std::to_string(i) + " expects width " +
                             std::to_string(layers[i].input_width()) + ", receives " + std::to_string(in));
        }
        in = layers[i].output_width();
    }
}

Tensor draw_normal(Rng& rng, Shape shape, double scale) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = scale * rng.normal();
    return t;
}

DenseLayer init_dense(Rng& rng, std::size_t in, std::size_t out, ActivationSpec act, bool scale_init) {
    const double s = scale_init ? 1.0 / std::sqrt(static_cast<double>(in)) : 1.0;
    DenseLayer layer;
    layer.weights = draw_normal(rng, Shape{out, in}, s);
    layer.bias = draw_normal(rng, Shape{out}, s);
    layer.activation = act;
    return layer;
}

Var run_stack(Tape& tape, std::vector<DenseLayer>& layers, std::vector<BatchNormState>& bn, bool use_bn,
              bool norm_last, Var h, const ForwardOptions& opts, std::vector<Var>* params, const char* what) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& layer = layers[i];
        const bool normalized = use_bn && (norm_last || i + 1 < layers.size());
        try {
            Var w = tape.leaf(layer.weights, opts.track_params);
            Var b = tape.leaf(layer.bias, opts.track_params);
            if (params) {
                params->push_back(w);
                params->push_back(b);
            }
            if (normalized) {
                auto& state = bn.at(i);
                Var gamma = tape.leaf(state.gamma, opts.track_params);
                Var beta = tape.leaf(state.beta, opts.track_params);
                if (params) {
                    params->push_back(gamma);
                    params->push_back(beta);
                }
                Var affine = record_dense(tape, h, w, b, ActivationSpec::none());
                h = tape.activate(record_batch_norm(tape, state, affine, gamma, beta, opts), layer.activation);
            } else {
                h = record_dense(tape, h, w, b, layer.activation);
            }
        } catch (const NumericError& e) {
            throw NumericError(std::string("non-finite activation in ") + what + " layer " + std::to_string(i) +
                               ": " + e.what());
        }
    }
    return h;
}

}  // namespace

void DenseLayer::validate() const {
    if (weights.rank() != 2) throw ShapeError("dense weights must be a matrix");
    if (bias.rank() != 1 || bias.size() != weights.rows()) {
        throw ShapeError("dense bias " + shape_string(bias.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
    }
    if (activation.kind == Activation::LeakyRelu && !(activation.param > 0.0 && activation.param < 1.0)) {
        throw ConfigError("leaky_relu alpha must lie in (0, 1)");
    }
    if (activation.kind == Activation::InvSqrt) throw ConfigError("inv_sqrt is not a layer activation");
}

void RsrLayer::validate() const {
    if (a.rank() != 2) throw ShapeError("RSR matrix must be d x D");
    if (a.rows() >= a.cols()) {
        throw ShapeError("RSR layer needs d < D, got " + shape_string(a.shape()));
    }
    if (!a.all_finite()) throw NumericError("RSR matrix has non-finite entries");
}

BatchNormState BatchNormState::identity(std::size_t width) {
    BatchNormState s;
    s.gamma = Tensor(Shape{width}, 1.0);
    s.beta = Tensor(Shape{width}, 0.0);
    s.running_mean = Tensor(Shape{width}, 0.0);
    s.running_var = Tensor(Shape{width}, 1.0);
    return s;
}

void BatchNormState::validate() const {
    const std::size_t w = gamma.size();
    if (beta.size() != w || running_mean.size() != w || running_var.size() != w) {
        throw ShapeError("batch-norm state tensors disagree in width");
    }
    if (!(eps > 0.0)) throw ConfigError("batch-norm eps must be positive");
    if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("batch-norm momentum must lie in [0, 1]");
    for (double v : running_var.data()) {
        if (v < 0.0) throw NumericError("batch-norm running variance is negative");
    }
}

void AutoencoderModel::validate() const {
    if (encoder.empty() || decoder.empty()) throw ShapeError("encoder and decoder need at least one layer");
    check_layer_chain(encoder, encoder.front().input_width(), "encoder");
    rsr.validate();
    if (encoder.back().output_width() != rsr.code_dim()) {
        throw ShapeError("encoder output width " + std::to_string(encoder.back().output_width()) +
                         " != RSR input width " + std::to_string(rsr.code_dim()));
    }
    check_layer_chain(decoder, rsr.latent_dim(), "decoder");
    if (decoder.back().output_width() != input_dim()) {
        throw ShapeError("decoder output width " + std::to_string(decoder.back().output_width()) +
                         " != input width " + std::to_string(input_dim()));
    }
    if (batch_norm) {
        if (encoder_bn.size() != encoder.size() || decoder_bn.size() + 1 != decoder.size()) {
            throw ShapeError("batch-norm state count does not match the layer count");
        }
        for (std::size_t i = 0; i < encoder.size(); ++i) {
            encoder_bn[i].validate();
            if (encoder_bn[i].width() != encoder[i].output_width()) throw ShapeError("encoder batch-norm width");
        }
        for (std::size_t i = 0; i < decoder_bn.size(); ++i) {
            decoder_bn[i].validate();
            if (decoder_bn[i].width() != decoder[i].output_width()) throw ShapeError("decoder batch-norm width");
        }
    }
}

std::vector<ParamRef> AutoencoderModel::parameters() {
    std::vector<ParamRef> out;
    auto add_stack = [&](std::vector<DenseLayer>& layers, std::vector<BatchNormState>& bn, ParamRole role,
                         const std::string& prefix, bool norm_last) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string tag = prefix + std::to_string(i);
            out.push_back({&layers[i].weights, role, tag + ".weights"});
            out.push_back({&layers[i].bias, role, tag + ".bias"});
            if (batch_norm && (norm_last || i + 1 < layers.size())) {
                out.push_back({&bn[i].gamma, role, tag + ".bn_gamma"});
                out.push_back({&bn[i].beta, role, tag + ".bn_beta"});
            }
        }
    };
    add_stack(encoder, encoder_bn, ParamRole::Encoder, "encoder.", true);
    out.push_back({&rsr.a, ParamRole::Rsr, "rsr.a"});
    add_stack(decoder, decoder_bn, ParamRole::Decoder, "decoder.", false);
    return out;
}

std::vector<ConstParamRef> AutoencoderModel::parameters() const {
    auto refs = const_cast<AutoencoderModel*>(this)->parameters();
    std::vector<ConstParamRef> out;
    out.reserve(refs.size());
    for (auto& r : refs) out.push_back({r.tensor, r.role, r.name});
    return out;
}

std::size_t AutoencoderModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor->size();
    return n;
}

void ModelSpec::validate() const {
    if (input_dim == 0) throw ConfigError("input dimension must be positive");
    if (encoder_widths.empty()) throw ConfigError("encoder needs at least one layer");
    for (auto w : encoder_widths)
        if (w == 0) throw ConfigError("zero-width encoder layer");
    for (auto w : decoder_widths)
        if (w == 0) throw ConfigError("zero-width decoder layer");
    if (latent_dim == 0) throw ConfigError("latent dimension d must be at least 1");
    if (latent_dim >= encoder_widths.back()) {
        throw ConfigError("latent dimension d=" + std::to_string(latent_dim) + " must be below the code width D=" +
                          std::to_string(encoder_widths.back()));
    }
    if (activation.kind == Activation::InvSqrt || output_activation.kind == Activation::InvSqrt) {
        throw ConfigError("inv_sqrt is not a layer activation");
    }
}

ModelSpec swiss_roll_model_spec() {
    ModelSpec s;
    s.input_dim = 3;
    s.encoder_widths = {32, 64, 128};
    s.latent_dim = 2;
    s.decoder_widths = {128, 64, 32};
    s.activation = ActivationSpec::leaky_relu(0.2);
    s.output_activation = ActivationSpec::leaky_relu(0.2);
    s.batch_norm = false;
    s.normalize_latent = false;
    return s;
}

ModelSpec dense_model_spec(std::size_t input_dim) {
    ModelSpec s;
    s.input_dim = input_dim;
    s.encoder_widths = {32, 64, 128};
    s.latent_dim = 10;
    s.decoder_widths = {128, 64, 32};
    s.activation = ActivationSpec::tanh();
    s.output_activation = ActivationSpec::none();
    s.batch_norm = true;
    s.normalize_latent = true;
    return s;
}

AutoencoderModel init_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    AutoencoderModel m;
    m.batch_norm = spec.batch_norm;
    m.normalize_latent = spec.normalize_latent;

    std::size_t in = spec.input_dim;
    for (auto w : spec.encoder_widths) {
        m.encoder.push_back(init_dense(rng, in, w, spec.activation, spec.scale_init));
        if (spec.batch_norm) m.encoder_bn.push_back(BatchNormState::identity(w));
        in = w;
    }
    const double s = spec.scale_init ? 1.0 / std::sqrt(static_cast<double>(in)) : 1.0;
    m.rsr.a = draw_normal(rng, Shape{spec.latent_dim, in}, s);

    in = spec.latent_dim;
    for (auto w : spec.decoder_widths) {
        m.decoder.push_back(init_dense(rng, in, w, spec.activation, spec.scale_init));
        if (spec.batch_norm) m.decoder_bn.push_back(BatchNormState::identity(w));
        in = w;
    }
    m.decoder.push_back(init_dense(rng, in, spec.input_dim, spec.output_activation, spec.scale_init));
    m.validate();
    return m;
}

Var record_dense(Tape& tape, Var x, Var weights, Var bias, ActivationSpec act) {
    Var affine = tape.add_bias(tape.matmul(x, tape.transpose(weights)), bias);
    return act.kind == Activation::None ? affine : tape.activate(affine, act);
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
    layer.validate();
    if (x.rank() != 2 || x.cols() != layer.input_width()) {
        throw ShapeError("dense layer expects N x " + std::to_string(layer.input_width()) + ", got " +
                         shape_string(x.shape()));
    }
    Tape tape;
    Var out = record_dense(tape, tape.constant(x), tape.constant(layer.weights), tape.constant(layer.bias),
                           layer.activation);
    return tape.value(out);
}

Var record_batch_norm(Tape& tape, BatchNormState& state, Var x, Var gamma, Var beta, const ForwardOptions& opts) {
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 2 || xv.cols() != state.width()) {
        throw ShapeError("batch norm of width " + std::to_string(state.width()) + " applied to " +
                         shape_string(xv.shape()));
    }
    const std::size_t n = xv.rows();
    Var centered, inv_std;
    if (opts.training) {
        if (n < 2) throw ShapeError("batch norm in training mode needs a batch of at least 2 rows");
        Var avg = tape.constant(Tensor(Shape{1, n}, 1.0 / static_cast<double>(n)));
        Var mean = tape.matmul(avg, x);
        centered = tape.add_bias(x, tape.scale(mean, -1.0));
        Var var = tape.matmul(avg, tape.square(centered));
        inv_std = tape.activate(var, ActivationSpec::inv_sqrt(state.eps));
        if (opts.update_running_stats) {
            const Tensor& mv = tape.value(mean);
            const Tensor& vv = tape.value(var);
            for (std::size_t j = 0; j < state.width(); ++j) {
                state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mv[j];
                state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * vv[j];
            }
        }
    } else {
        centered = tape.add_bias(x, tape.constant(-1.0 * state.running_mean));
        inv_std = tape.activate(tape.constant(state.running_var), ActivationSpec::inv_sqrt(state.eps));
    }
    Var normalized = tape.scale_columns(centered, inv_std);
    return tape.add_bias(tape.scale_columns(normalized, gamma), beta);
}

Tensor batch_norm_forward(BatchNormState& state, const Tensor& x, bool training) {
    state.validate();
    Tape tape;
    ForwardOptions opts;
    opts.training = training;
    opts.track_params = false;
    Var out = record_batch_norm(tape, state, tape.constant(x), tape.constant(state.gamma),
                                tape.constant(state.beta), opts);
    return tape.value(out);
}

Var record_row_normalize(Tape& tape, Var x) {
    const Tensor& xv = tape.value(x);
    const std::size_t n = xv.rows();
    Var norms = tape.row_norm(x);
    // Rows below the floor get +1 under the square root, which leaves them unscaled.
    Tensor pad(Shape{n});
    const Tensor& nv = tape.value(norms);
    for (std::size_t i = 0; i < n; ++i) pad[i] = nv[i] < kLatentNormFloor ? 1.0 : 0.0;
    Var inv = tape.activate(tape.add(tape.square(norms), tape.constant(pad)), ActivationSpec::inv_sqrt(0.0));
    return tape.transpose(tape.scale_columns(tape.transpose(x), inv));
}

Var record_encoder(Tape& tape, AutoencoderModel& model, Var input, const ForwardOptions& opts,
                   std::vector<Var>* params) {
    const Tensor& xv = tape.value(input);
    if (xv.rank() != 2 || xv.cols() != model.input_dim()) {
        throw ShapeError("model expects N x " + std::to_string(model.input_dim()) + " input, got " +
                         shape_string(xv.shape()));
    }
    return run_stack(tape, model.encoder, model.encoder_bn, model.batch_norm, true, input, opts, params, "encoder");
}

ModelVars record_forward(Tape& tape, AutoencoderModel& model, const Tensor& x, const ForwardOptions& opts) {
    ModelVars vars;
    vars.input = tape.constant(x);
    vars.code = record_encoder(tape, model, vars.input, opts, &vars.params);
    vars.a = tape.leaf(model.rsr.a, opts.track_params);
    vars.params.push_back(vars.a);
    try {
        vars.latent = tape.matmul(vars.code, tape.transpose(vars.a));
        vars.decoder_input = model.normalize_latent ? record_row_normalize(tape, vars.latent) : vars.latent;
    } catch (const NumericError& e) {
        throw NumericError(std::string("non-finite activation in RSR layer: ") + e.what());
    }
    vars.output = run_stack(tape, model.decoder, model.decoder_bn, model.batch_norm, false, vars.decoder_input,
                            opts, &vars.params, "decoder");
    return vars;
}

ModelOutputs model_forward(const AutoencoderModel& model, const Tensor& x) {
    Tape tape;
    ForwardOptions opts;
    opts.training = false;
    opts.track_params = false;
    // Inference never writes to the model.
    auto vars = record_forward(tape, const_cast<AutoencoderModel&>(model), x, opts);
    return {tape.value(vars.code), tape.value(vars.latent), tape.value(vars.decoder_input), tape.value(vars.output)};
}

std::vector<double> flatten_parameters(const AutoencoderModel& model) {
    std::vector<double> flat;
    for (const auto& p : model.parameters()) {
        auto d = p.tensor->data();
        flat.insert(flat.end(), d.begin(), d.end());
    }
    return flat;
}

void assign_parameters(AutoencoderModel& model, std::span<const double> flat) {
    std::size_t k = 0;
    for (auto& p : model.parameters()) {
        auto d = p.tensor->data();
        if (k + d.size() > flat.size()) throw ShapeError("flat parameter vector too short");
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(k),
                  flat.begin() + static_cast<std::ptrdiff_t>(k + d.size()), d.begin());
        k += d.size();
    }
    if (k != flat.size()) throw ShapeError("flat parameter vector too long");
}

// Checkpoint: a text header describing the architecture, terminated by "end\n",
// followed by binary tensors in a fixed order.
void write_model(std::ostream& out, const AutoencoderModel& model) {
    model.validate();
    out << "RSRAE-MODEL 1\n";
    out << "normalize_latent " << (model.normalize_latent ? 1 : 0) << "\n";
    out << "batch_norm " << (model.batch_norm ? 1 : 0) << "\n";
    auto layers = [&](const char* name, const std::vector<DenseLayer>& ls) {
        out << name << " " << ls.size() << "\n";
        for (const auto& l : ls) {
            std::ostringstream alpha;
            alpha.precision(17);
            alpha << l.activation.param;
            out << "layer " << l.input_width() << " " << l.output_width() << " " << activation_name(l.activation)
                << " " << alpha.str() << "\n";
        }
    };
    layers("encoder", model.encoder);
    out << "rsr " << model.latent_dim() << " " << model.code_dim() << "\n";
    layers("decoder", model.decoder);
    auto bn_line = [&](const BatchNormState& s) {
        std::ostringstream os;
        os.precision(17);
        os << "bn " << s.momentum << " " << s.eps << "\n";
        out << os.str();
    };
    for (const auto& s : model.encoder_bn) bn_line(s);
    for (const auto& s : model.decoder_bn) bn_line(s);
    out << "end\n";
    for (const auto& p : model.parameters()) write_tensor(out, *p.tensor);
    for (const auto& s : model.encoder_bn) {
        write_tensor(out, s.running_mean);
        write_tensor(out, s.running_var);
    }
    for (const auto& s : model.decoder_bn) {
        write_tensor(out, s.running_mean);
        write_tensor(out, s.running_var);
    }
    if (!out) throw IoError("failed writing model checkpoint");
}

AutoencoderModel read_model(std::istream& in) {
    auto next_line = [&]() {
        std::string line;
        if (!std::getline(in, line)) throw IoError("model checkpoint header truncated");
        return line;
    };
    if (next_line() != "RSRAE-MODEL 1") throw IoError("not a model checkpoint (bad header)");

    AutoencoderModel m;
    auto expect = [](std::istringstream& ls, const std::string& key) {
        std::string k;
        ls >> k;
        if (k != key) throw IoError("model checkpoint: expected '" + key + "', got '" + k + "'");
    };
    {
        std::istringstream ls(next_line());
        int v = 0;
        expect(ls, "normalize_latent");
        ls >> v;
        m.normalize_latent = v != 0;
    }
    {
        std::istringstream ls(next_line());
        int v = 0;
        expect(ls, "batch_norm");
        ls >> v;
        m.batch_norm = v != 0;
    }
    auto read_layers = [&](const char* name) {
        std::istringstream ls(next_line());
        std::size_t count = 0;
        expect(ls, name);
        ls >> count;
        std::vector<DenseLayer> layers(count);
        for (auto& l : layers) {
            std::istringstream row(next_line());
            std::size_t in_w = 0, out_w = 0;
            std::string act;
            double param = 0.0;
            expect(row, "layer");
            row >> in_w >> out_w >> act >> param;
            if (!row || in_w == 0 || out_w == 0) throw IoError("model checkpoint: malformed layer line");
            l.weights = Tensor(Shape{out_w, in_w});
            l.bias = Tensor(Shape{out_w});
            l.activation = parse_activation(act, param);
        }
        return layers;
    };
    m.encoder = read_layers("encoder");
    {
        std::istringstream ls(next_line());
        std::size_t d = 0, big_d = 0;
        expect(ls, "rsr");
        ls >> d >> big_d;
        if (!ls || d == 0 || big_d == 0) throw IoError("model checkpoint: malformed rsr line");
        m.rsr.a = Tensor(Shape{d, big_d});
    }
    m.decoder = read_layers("decoder");
    if (m.batch_norm) {
        auto read_bn = [&](std::size_t width) {
            std::istringstream ls(next_line());
            auto s = BatchNormState::identity(width);
            expect(ls, "bn");
            ls >> s.momentum >> s.eps;
            if (!ls) throw IoError("model checkpoint: malformed bn line");
            return s;
        };
        for (const auto& l : m.encoder) m.encoder_bn.push_back(read_bn(l.output_width()));
        for (std::size_t i = 0; i + 1 < m.decoder.size(); ++i) {
            m.decoder_bn.push_back(read_bn(m.decoder[i].output_width()));
        }
    }
    if (next_line() != "end") throw IoError("model checkpoint: missing 'end' marker");

    for (auto& p : m.parameters()) {
        Tensor t = read_tensor(in);
        if (t.shape() != p.tensor->shape()) throw IoError("model checkpoint: tensor shape mismatch for " + p.name);
        *p.tensor = std::move(t);
    }
    auto read_stats = [&](BatchNormState& s) {
        s.running_mean = read_tensor(in);
        s.running_var = read_tensor(in);
    };
    for (auto& s : m.encoder_bn) read_stats(s);
    for (auto& s : m.decoder_bn) read_stats(s);
    m.validate();
    return m;
}

void save_model(const std::string& path, const AutoencoderModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_model(out, model);
}

AutoencoderModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_model(in);
}

}  // namespace rsrae
