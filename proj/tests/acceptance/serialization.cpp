/* Copyright 2026 The Genesis Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "genesis/detail/bytes.hpp"
#include "genesis/model.hpp"
#include "genesis/volume.hpp"
#include "harness.hpp"

using namespace genesis;

namespace acceptance {

namespace {

constexpr int kInstances = 1000;

std::filesystem::path scratch_dir() {
  auto d = std::filesystem::temp_directory_path() / "genesis_acceptance_io";
  std::filesystem::create_directories(d);
  return d;
}

Volume random_volume(Rng& rng) {
  const Dims3 dims{static_cast<std::size_t>(uniform_int(rng, 1, 16)), static_cast<std::size_t>(uniform_int(rng, 1, 16)),
                   static_cast<std::size_t>(uniform_int(rng, 1, 12))};
  const Spacing3 spacing{static_cast<float>(0.1 + 4 * uniform01(rng)), static_cast<float>(0.1 + 4 * uniform01(rng)),
                         static_cast<float>(0.1 + 4 * uniform01(rng))};
  const bool unit = bernoulli(rng, 0.5);
  std::vector<float> data(dims.count());
  for (float& v : data) v = unit ? static_cast<float>(uniform01(rng)) : static_cast<float>(-2000 + 5000 * uniform01(rng));
  return Volume(dims, std::move(data), spacing, unit ? IntensityDomain::Unit : IntensityDomain::Hounsfield);
}

std::string random_token(Rng& rng, std::size_t max_len) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_.";
  std::string s(static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(max_len))), 'a');
  for (char& ch : s) ch = alphabet[static_cast<std::size_t>(uniform_int(rng, 0, alphabet.size() - 1))];
  return s;
}

Checkpoint random_checkpoint(Rng& rng) {
  Checkpoint c;
  const auto n_meta = uniform_int(rng, 0, 5);
  std::set<std::string> keys;
  for (int i = 0; i < n_meta; ++i) {
    const std::string k = "k" + random_token(rng, 8);
    if (keys.insert(k).second) c.metadata.emplace_back(k, random_token(rng, 24));
  }
  std::set<std::string> names;
  const auto n_tensors = uniform_int(rng, 1, 6);
  for (int i = 0; i < n_tensors; ++i) {
    const std::string name = random_token(rng, 20);
    if (!names.insert(name).second) continue;
    nn::Shape shape(static_cast<std::size_t>(uniform_int(rng, 1, 4)));
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(uniform_int(rng, 1, 5));
      count *= d;
    }
    std::vector<float> data(count);
    for (float& v : data) v = static_cast<float>(-10 + 20 * uniform01(rng));
    c.tensors.push_back({name, shape, data});
  }
  return c;
}

template <typename Err, typename Code, typename Decode>
bool raises(Decode decode, const std::vector<std::uint8_t>& bytes, Code code) {
  try {
    decode(bytes);
  } catch (const Err& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace

Outcome serialization() {
  Checks c;
  Rng rng(derive_seed(7, 7));
  const auto dir = scratch_dir();

  int mvol_bad = 0;
  for (int i = 0; i < kInstances; ++i) {
    const Volume v = random_volume(rng);
    const auto bytes = encode_mvol(v);
    const Volume back = decode_mvol(bytes);
    bool ok = back == v && encode_mvol(back) == bytes;
    if (i % 10 == 0) {
      const auto path = dir / "rt.mvol";
      write_mvol(v, path);
      std::vector<std::uint8_t> on_disk;
      ok = ok && detail::slurp(path, on_disk) && on_disk == bytes && read_mvol(path) == v;
    }
    mvol_bad += !ok;
  }
  c.expect(mvol_bad == 0, "mvol round trip");

  int ckpt_bad = 0;
  for (int i = 0; i < kInstances; ++i) {
    const Checkpoint ck = random_checkpoint(rng);
    const auto bytes = encode_checkpoint(ck);
    const Checkpoint back = decode_checkpoint(bytes);
    bool ok = back == ck && encode_checkpoint(back) == bytes;
    if (i % 10 == 0) {
      const auto path = dir / "rt.mgen";
      write_checkpoint(ck, path);
      std::vector<std::uint8_t> on_disk;
      ok = ok && detail::slurp(path, on_disk) && on_disk == bytes && read_checkpoint(path) == ck;
    }
    ckpt_bad += !ok;
  }
  {
    UNet<float> net(UNetConfig::toy());
    nn::init_weights(net, {nn::InitKind::Msra, 9});
    const auto path = dir / "toy.mgen";
    save_checkpoint(net, config_metadata(UNetConfig::toy()), path);
    const Checkpoint loaded = load_checkpoint(path);
    UNet<float> fresh(UNetConfig::toy());
    load_into(fresh, loaded);
    ckpt_bad += !(make_checkpoint(fresh).tensors == loaded.tensors &&
                  encode_checkpoint(read_checkpoint(path)) == encode_checkpoint(loaded));
  }
  c.expect(ckpt_bad == 0, "checkpoint round trip");
  c.note("instances", kInstances);

  // MVOL taxonomy.
  {
    const Volume v({4, 3, 2}, std::vector<float>(24, 0.5f));
    const auto good = encode_mvol(v);
    auto dec = [](const std::vector<std::uint8_t>& b) { return decode_mvol(b); };
    std::map<MvolErrorCode, bool> hit;
    auto probe = [&](std::vector<std::uint8_t> b, MvolErrorCode code) {
      hit[code] = raises<MvolError>(dec, b, code);
    };
    auto b = good;
    b[0] = 'X';
    probe(b, MvolErrorCode::BadMagic);
    b = good;
    b[4] = 3;
    probe(b, MvolErrorCode::UnsupportedVersion);
    b = good;
    b[32] = 2;
    probe(b, MvolErrorCode::UnsupportedDtype);
    b = good;
    b[33] = 5;
    probe(b, MvolErrorCode::BadDomain);
    b = good;
    std::fill_n(b.begin() + 8, 4, 0);
    probe(b, MvolErrorCode::BadHeader);
    probe(std::vector<std::uint8_t>(good.begin(), good.end() - 1), MvolErrorCode::Truncated);
    b = good;
    b.push_back(0);
    probe(b, MvolErrorCode::DimPayloadMismatch);
    b = good;
    b[kMvolHeaderBytes + 3] = 0x7f;  // NaN in a UNIT volume
    probe(b, MvolErrorCode::InvalidContent);
    try {
      read_mvol(dir / "missing.mvol");
      hit[MvolErrorCode::OpenFailed] = false;
    } catch (const MvolError& e) {
      hit[MvolErrorCode::OpenFailed] = e.code() == MvolErrorCode::OpenFailed;
    }
    // Every proper prefix is reported as truncated.
    bool prefixes = true;
    for (std::size_t n = 0; n < good.size(); ++n)
      prefixes = prefixes && raises<MvolError>(dec, std::vector<std::uint8_t>(good.begin(), good.begin() + n),
                                                 MvolErrorCode::Truncated);
    for (const auto& [code, ok] : hit) c.expect(ok, std::string("mvol ") + to_string(code));
    c.expect(hit.size() == 9, "mvol taxonomy incomplete");
    c.expect(prefixes, "mvol prefix truncation");
  }

  // Checkpoint taxonomy.
  {
    Checkpoint ck;
    ck.metadata = {{"k", "v"}};
    ck.tensors = {{"a", {2, 2}, {1, 2, 3, 4}}, {"b", {3}, {5, 6, 7}}};
    const auto good = encode_checkpoint(ck);
    auto dec = [](const std::vector<std::uint8_t>& b) { return decode_checkpoint(b); };
    std::map<CheckpointErrorCode, bool> hit;
    auto probe = [&](std::vector<std::uint8_t> b, CheckpointErrorCode code) {
      hit[code] = raises<CheckpointError>(dec, b, code);
    };
    // 4 magic + 4 version + 4 meta_len + 4 meta ("k=v\n") + 4 count; then
    // tensor a: u16 name_len, name, dtype, rank, dims.
    const std::size_t a_hdr = 20;
    auto b = good;
    b[1] = 'X';
    probe(b, CheckpointErrorCode::BadMagic);
    b = good;
    b[4] = 9;
    probe(b, CheckpointErrorCode::UnsupportedVersion);
    b = good;
    b[a_hdr + 3] = 4;
    probe(b, CheckpointErrorCode::UnsupportedDtype);
    b = good;
    b[12 + 3] = 'x';
    probe(b, CheckpointErrorCode::BadMetadata);
    probe(std::vector<std::uint8_t>(good.begin(), good.begin() + 10), CheckpointErrorCode::Truncated);
    b = good;
    b[a_hdr + 5] = 9;
    probe(b, CheckpointErrorCode::TensorLengthMismatch);
    b = good;
    b.push_back(1);
    probe(b, CheckpointErrorCode::TrailingBytes);
    b = good;
    b[a_hdr + 5 + 4 * 2 + 16 + 2] = 'a';
    probe(b, CheckpointErrorCode::DuplicateName);
    try {
      read_checkpoint(dir / "missing.mgen");
      hit[CheckpointErrorCode::OpenFailed] = false;
    } catch (const CheckpointError& e) {
      hit[CheckpointErrorCode::OpenFailed] = e.code() == CheckpointErrorCode::OpenFailed;
    }
    // Every proper prefix fails with a checkpoint error.
    bool prefixes = true;
    for (std::size_t n = 0; n < good.size(); ++n) {
      try {
        decode_checkpoint(std::vector<std::uint8_t>(good.begin(), good.begin() + n));
        prefixes = false;
      } catch (const CheckpointError&) {
      }
    }
    for (const auto& [code, ok] : hit) c.expect(ok, std::string("checkpoint ") + to_string(code));
    c.expect(hit.size() == 9, "checkpoint taxonomy incomplete");
    c.expect(prefixes, "checkpoint prefix truncation");
    c.note("error_codes_exercised", 18);
  }
  std::filesystem::remove_all(dir);
  return c.outcome();
}

}  // namespace acceptance
