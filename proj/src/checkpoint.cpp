// Copyright 2026 The framecls Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "framecls/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "framecls/binary_io.hpp"

namespace framecls {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'K'};

void put_string16(BinaryWriter& w, const std::string& s) {
  w.put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
  w.put_bytes(s);
}

void put_string32(BinaryWriter& w, const std::string& s) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  w.put_bytes(s);
}

void put_matrix(BinaryWriter& w, const Matrix& m) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  w.put_array(m.data(), static_cast<std::size_t>(m.size()));
}

Matrix get_matrix(BinaryReader& r) {
  const auto rows = r.get<std::uint32_t>("rows");
  const auto cols = r.get<std::uint32_t>("cols");
  Matrix m(rows, cols);
  r.get_array(m.data(), static_cast<std::size_t>(m.size()), "tensor data");
  return m;
}

struct RawCheckpoint {
  ModelKind kind;
  std::string config_text;
  std::vector<std::pair<std::string, Matrix>> tensors;
  RmsPropConfig optimizer;
  std::vector<Matrix> accumulators;
  std::uint64_t samples_seen = 0;
  std::uint64_t step = 0;
  std::string rng_state;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  BinaryReader r(in);
  if (r.get_bytes(4, "magic") != std::string(kMagic, 4)) throw FormatError("bad checkpoint magic (expected FGCK)", 0);
  const std::uint64_t version_offset = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointMismatch("unsupported checkpoint version " + std::to_string(version) + " at byte offset " +
                             std::to_string(version_offset));

  RawCheckpoint raw;
  const std::uint64_t kind_offset = r.offset();
  std::string kind_tag = r.get_bytes(r.get<std::uint16_t>("kind length"), "kind tag");
  try {
    raw.kind = parse_model_kind(kind_tag);
  } catch (const std::invalid_argument&) {
    throw FormatError("unknown model kind tag '" + kind_tag + "'", kind_offset);
  }
  raw.config_text = r.get_bytes(r.get<std::uint32_t>("config length"), "config text");

  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_bytes(r.get<std::uint16_t>("name length"), "tensor name");
    raw.tensors.emplace_back(std::move(name), get_matrix(r));
  }

  raw.optimizer.decay_rate = r.get<double>("decay_rate");
  raw.optimizer.epsilon = r.get<double>("epsilon");
  raw.optimizer.base_lr = r.get<double>("base_lr");
  raw.optimizer.lr_decay_every_samples = r.get<std::uint64_t>("lr_decay_every_samples");
  raw.optimizer.lr_decay_factor = r.get<double>("lr_decay_factor");
  const auto acc_count = r.get<std::uint32_t>("accumulator count");
  for (std::uint32_t i = 0; i < acc_count; ++i) raw.accumulators.push_back(get_matrix(r));

  raw.samples_seen = r.get<std::uint64_t>("samples_seen");
  raw.step = r.get<std::uint64_t>("step");
  raw.rng_state = r.get_bytes(r.get<std::uint32_t>("rng length"), "rng state");
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.offset());
  return raw;
}

void apply(const RawCheckpoint& raw, Model& model, TrainState& state) {
  const ParameterList& tensors = model.state_tensors();
  if (raw.tensors.size() != tensors.size())
    throw CheckpointMismatch("checkpoint has " + std::to_string(raw.tensors.size()) + " tensors, model expects " +
                             std::to_string(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, value] = raw.tensors[i];
    Parameter& p = *tensors[i];
    if (name != p.name || value.rows() != p.value.rows() || value.cols() != p.value.cols())
      throw CheckpointMismatch("checkpoint tensor '" + name + "' does not match model tensor '" + p.name + "'");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    tensors[i]->value = raw.tensors[i].second;
    tensors[i]->zero_grad();
  }

  validate(raw.optimizer);
  state.optimizer.config = raw.optimizer;
  state.optimizer.accumulators = raw.accumulators;
  state.samples_seen = raw.samples_seen;
  state.step = raw.step;
  std::istringstream rng_in(raw.rng_state);
  rng_in >> state.rng;
  if (!rng_in) throw std::runtime_error("corrupt rng state in checkpoint");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  BinaryWriter w(out);
  out.write(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  put_string16(w, to_string(model.kind()));
  put_string32(w, to_canonical_text(to_key_values(model.config())));

  const ParameterList& tensors = model.state_tensors();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const Parameter* p : tensors) {
    put_string16(w, p->name);
    put_matrix(w, p->value);
  }

  const RmsPropConfig& opt = state.optimizer.config;
  w.put<double>(opt.decay_rate);
  w.put<double>(opt.epsilon);
  w.put<double>(opt.base_lr);
  w.put<std::uint64_t>(opt.lr_decay_every_samples);
  w.put<double>(opt.lr_decay_factor);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(state.optimizer.accumulators.size()));
  for (const Matrix& acc : state.optimizer.accumulators) put_matrix(w, acc);

  w.put<std::uint64_t>(state.samples_seen);
  w.put<std::uint64_t>(state.step);
  std::ostringstream rng_out;
  rng_out << state.rng;
  put_string32(w, rng_out.str());
  out.flush();
  if (!out) throw std::runtime_error("I/O failure while writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  Checkpoint ck;
  ck.config = model_config_from(raw.kind, parse_key_values(raw.config_text));
  ck.model = make_model(ck.config, 0);
  apply(raw, *ck.model, ck.state);
  return ck;
}

void restore_checkpoint(const std::filesystem::path& path, Model& model, TrainState& state) {
  RawCheckpoint raw = read_raw(path);
  if (raw.kind != model.kind())
    throw CheckpointMismatch("checkpoint holds a '" + to_string(raw.kind) + "' model, cannot load into '" +
                             to_string(model.kind()) + "'");
  if (raw.config_text != to_canonical_text(to_key_values(model.config())))
    throw CheckpointMismatch("checkpoint config differs from the model config");
  apply(raw, model, state);
}

}  // namespace framecls
