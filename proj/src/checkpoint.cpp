#include "uwbresp/checkpoint.hpp"

#include <bit>
#include <iomanip>
#include <sstream>

namespace uwbresp {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint blocks are written in native byte order");

Json to_json(const NetworkConfig& c) {
  return {{"encoder_channels", c.encoder_channels},
          {"decoder_channels", c.decoder_channels},
          {"kernel_size", c.kernel_size},
          {"latent_dim", c.latent_dim},
          {"leaky_relu_slope", c.leaky_slope},
          {"input_channels", c.input_channels},
          {"frames", c.frames},
          {"initial_log_var", c.initial_log_var}};
}

NetworkConfig network_config_from_json(const Json& j) {
  NetworkConfig c;
  c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
  c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.leaky_slope = j.value("leaky_relu_slope", c.leaky_slope);
  c.input_channels = j.value("input_channels", c.input_channels);
  c.initial_log_var = j.value("initial_log_var", c.initial_log_var);
  c.frames = j.value("frames", c.frames);
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"eta", c.eta},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "sgd"},
          {"momentum", c.momentum},
          {"adam_beta2", c.adam_beta2},
          {"cosine_decay", c.cosine_decay},
          {"epochs", c.epochs},
          {"rng_seed", c.rng_seed},
          {"augment_count", c.augment_count},
          {"grad_clip", c.grad_clip},
          {"warmup_epochs", c.warmup_epochs}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.eta = j.value("eta", c.eta);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  const std::string opt = j.value("optimizer", std::string(c.optimizer == Optimizer::adam ? "adam" : "sgd"));
  if (opt != "sgd" && opt != "adam") throw std::invalid_argument("optimizer must be sgd or adam");
  c.optimizer = opt == "adam" ? Optimizer::adam : Optimizer::sgd;
  c.momentum = j.value("momentum", c.momentum);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.cosine_decay = j.value("cosine_decay", c.cosine_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.augment_count = j.value("augment_count", c.augment_count);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.validate();
  return c;
}

std::string loss_history_csv(const std::vector<EpochStats>& history) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "epoch,L_RC,L_IR,L_QR,L_DA,total\n";
  for (const auto& e : history)
    os << e.epoch << ',' << e.loss.rc << ',' << e.loss.kl_i << ',' << e.loss.kl_q << ',' << e.loss.da << ','
       << e.total << '\n';
  return os.str();
}

namespace {

struct Block {
  std::string name;
  Eigen::Map<Mat<float>> data;
};

std::vector<Block> blocks(IqVed<float>& net) {
  std::vector<Block> out;
  const auto ps = net.params();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& m = ps[k]->value;
    out.push_back({"param." + std::to_string(k), Eigen::Map<Mat<float>>(m.data(), m.rows(), m.cols())});
  }
  const auto ns = net.norms();
  for (std::size_t k = 0; k < ns.size(); ++k) {
    auto& mean = ns[k]->running_mean;
    auto& var = ns[k]->running_var;
    out.push_back({"norm." + std::to_string(k) + ".running_mean", Eigen::Map<Mat<float>>(mean.data(), mean.size(), 1)});
    out.push_back({"norm." + std::to_string(k) + ".running_var", Eigen::Map<Mat<float>>(var.data(), var.size(), 1)});
  }
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& dir, IqVed<float>& net, const TrainConfig& training,
                     const std::vector<EpochStats>& history) {
  fs::create_directories(dir);
  std::vector<float> flat;
  Json table = Json::array();
  for (const auto& b : blocks(net)) {
    table.push_back({{"name", b.name}, {"rows", b.data.rows()}, {"cols", b.data.cols()}, {"offset", flat.size()}});
    flat.insert(flat.end(), b.data.data(), b.data.data() + b.data.size());
  }
  Json hist = Json::array();
  for (const auto& e : history)
    hist.push_back({{"epoch", e.epoch},
                    {"L_RC", e.loss.rc},
                    {"L_IR", e.loss.kl_i},
                    {"L_QR", e.loss.kl_q},
                    {"L_DA", e.loss.da},
                    {"total", e.total}});
  Json j = {{"format", "uwbresp-iqved-1"},
            {"network", to_json(net.config())},
            {"training", to_json(training)},
            {"epoch", history.empty() ? 0 : history.back().epoch},
            {"loss_history", hist},
            {"parameter_file", "params.f32"},
            {"parameter_count", flat.size()},
            {"blocks", table}};
  write_text(dir / "model.json", j.dump(2) + "\n");
  write_f32(dir / "params.f32", flat);
  write_text(dir / "loss_history.csv", loss_history_csv(history));
}

IqVed<float> load_checkpoint(const fs::path& dir, Checkpoint* meta) {
  const Json j = Json::parse(read_text(dir / "model.json"));
  if (j.value("format", "") != "uwbresp-iqved-1") throw std::runtime_error("not an IQ-VED checkpoint: " + dir.string());
  IqVed<float> net(network_config_from_json(j.at("network")));
  const std::vector<float> flat = read_f32(dir / j.value("parameter_file", "params.f32"));
  const auto table = j.at("blocks");
  auto bs = blocks(net);
  if (table.size() != bs.size()) throw std::runtime_error("checkpoint block count does not match the network");
  for (std::size_t k = 0; k < bs.size(); ++k) {
    const auto& t = table[k];
    const auto off = t.at("offset").get<std::size_t>();
    if (t.at("rows").get<Index>() != bs[k].data.rows() || t.at("cols").get<Index>() != bs[k].data.cols() ||
        off + static_cast<std::size_t>(bs[k].data.size()) > flat.size())
      throw std::runtime_error("checkpoint block " + t.at("name").get<std::string>() + " has the wrong shape");
    bs[k].data = Eigen::Map<const Mat<float>>(flat.data() + off, bs[k].data.rows(), bs[k].data.cols());
  }
  if (meta) {
    meta->network = net.config();
    meta->training = train_config_from_json(j.at("training"));
    meta->history.clear();
    for (const auto& h : j.at("loss_history")) {
      EpochStats e;
      e.epoch = h.at("epoch");
      e.loss = {h.at("L_RC"), h.at("L_IR"), h.at("L_QR"), h.at("L_DA")};
      e.total = h.at("total");
      meta->history.push_back(e);
    }
  }
  return net;
}

}  // namespace uwbresp
