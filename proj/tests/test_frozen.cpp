#include <cstring>

#include "doctest.h"
#include "fixtures.hpp"
#include "xespred/frozen.hpp"

using namespace xespred;
using xespred::testing::error_kind;

namespace {

FrozenModel sample_model() {
  EventLog log = xespred::testing::toy_log({{"A", "B", "C"}, {"B", "C"}});
  log.global_event_attrs.set("x", 0.0);
  double x = 1.0;
  for (auto& t : log.traces) {
    for (auto& e : t.events) e.attributes.set("x", x *= 1.5);
  }
  FrozenModel model;
  SchemaConfig sc;
  sc.predictors = {"concept:name", "x"};
  sc.targets = {"concept:name", "x"};
  model.schema = build_schema(log, sc);
  model.config.hidden = 3;
  model.config.layers = 2;
  model.config.shared_rnn = false;
  model.config.seed = 42;
  model.params = build_model(model.schema, model.config);
  model.config = architecture_fields(model.config);
  model.metadata = {"toy.xes", 3, {{"concept:name", 0.5}, {"x", 0.25}}};
  model.event_attribute_types = {{"concept:name", AttributeType::text},
                                 {"x", AttributeType::real}};
  model.trace_attribute_types = {{"concept:name", AttributeType::text}};
  return model;
}

void put_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

void reseal(std::string& bytes) {
  const std::size_t body = bytes.size() - 8;
  std::uint64_t crc = crc64({reinterpret_cast<const unsigned char*>(bytes.data()), body});
  for (int i = 0; i < 8; ++i) bytes[body + i] = static_cast<char>((crc >> (8 * i)) & 0xff);
}

}  // namespace

TEST_CASE("crc64 check value") {
  const char* text = "123456789";
  CHECK(crc64({reinterpret_cast<const unsigned char*>(text), 9}) == 0x995DC9BBDF1939FAULL);
}

TEST_CASE("save and load preserve every parameter bit") {
  const FrozenModel model = sample_model();
  const auto dir = xespred::testing::make_temp_dir("frozen");
  const std::string path = (dir / "m.xtfp").string();
  save_frozen(model, path);
  const FrozenModel back = load_frozen(path);
  CHECK(back.params == model.params);
  CHECK(back.schema == model.schema);
  CHECK(back.config == model.config);
  CHECK(back.metadata == model.metadata);
  CHECK(back.event_attribute_types == model.event_attribute_types);
  CHECK(serialize_frozen(back) == serialize_frozen(model));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("header layout") {
  const std::string bytes = serialize_frozen(sample_model());
  CHECK(bytes.substr(0, 4) == "XTFP");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
}

TEST_CASE("truncated files fail the checksum") {
  const std::string bytes = serialize_frozen(sample_model());
  for (const std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{30}}) {
    CAPTURE(cut);
    CHECK(error_kind([&] { deserialize_frozen(std::string_view(bytes).substr(0, cut)); }) ==
          ErrorKind::format);
  }
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  try {
    deserialize_frozen(flipped);
    FAIL("expected checksum error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
}

TEST_CASE("newer versions are refused explicitly") {
  std::string bytes = serialize_frozen(sample_model());
  put_u32(bytes, 4, 2);
  reseal(bytes);
  try {
    deserialize_frozen(bytes);
    FAIL("expected version error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(std::string(e.what()).find("unsupported format version 2") != std::string::npos);
  }
}

TEST_CASE("bad magic and trailing bytes") {
  std::string bytes = serialize_frozen(sample_model());
  std::string magic = bytes;
  magic[0] = 'Y';
  CHECK(error_kind([&] { deserialize_frozen(magic); }) == ErrorKind::format);

  std::string longer = bytes.substr(0, bytes.size() - 8) + std::string(8, '\0');
  longer += std::string(8, '\0');
  reseal(longer);
  CHECK(error_kind([&] { deserialize_frozen(longer); }) == ErrorKind::format);
}

TEST_CASE("checkpoints carry optimizer state") {
  FrozenModel model = sample_model();
  CheckpointState state;
  state.epochs_completed = 2;
  state.optimizer_steps = 17;
  state.learning_rate = 0.005;
  state.epoch_losses = {1.5, 1.25};
  for (const auto& [name, m] : model.params.tensors()) {
    state.first_slots.emplace_back(m->rows(), m->cols(), 0.125);
    state.second_slots.emplace_back(m->rows(), m->cols(), 0.5);
  }
  const std::string bytes = serialize_frozen(model, &state);
  CheckpointState back;
  const FrozenModel loaded = deserialize_frozen(bytes, &back);
  CHECK(loaded.params == model.params);
  CHECK(back.epochs_completed == 2);
  CHECK(back.optimizer_steps == 17);
  CHECK(back.learning_rate == 0.005);
  CHECK(back.epoch_losses == state.epoch_losses);
  CHECK(back.first_slots == state.first_slots);
  CHECK(back.second_slots == state.second_slots);

  CheckpointState none;
  CHECK(error_kind([&] { deserialize_frozen(serialize_frozen(model), &none); }) ==
        ErrorKind::format);
}

TEST_CASE("missing file is an io error") {
  CHECK(error_kind([] { load_frozen("/nonexistent/model.xtfp"); }) == ErrorKind::io);
}
