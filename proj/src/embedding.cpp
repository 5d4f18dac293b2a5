#include "hybridet/embedding.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hybridet/error.hpp"
#include "hybridet/rng.hpp"

namespace hybridet {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                      const std::vector<std::string>& ids) {
  if (matrix.n == 0 || matrix.d == 0)
    throw ConfigError("embedding matrix must be non-empty");
  if (matrix.data.size() != static_cast<std::size_t>(matrix.n) * matrix.d)
    throw ConfigError("embedding matrix size does not match n*d");
  if (ids.size() != matrix.n)
    throw ConfigError("id count does not match embedding row count");
  for (float v : matrix.data)
    if (!std::isfinite(v)) throw ConfigError("non-finite value in embedding matrix");

  std::string buf;
  buf.reserve(12 + matrix.data.size() * 4);
  buf.append(kMagic, 4);
  put_u32_le(buf, matrix.n);
  put_u32_le(buf, matrix.d);
  for (float v : matrix.data) put_u32_le(buf, std::bit_cast<std::uint32_t>(v));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("short write to embedding file: " + path.string());

  std::ofstream ids_out(path.string() + ".ids");
  if (!ids_out) throw Error("cannot write ids sidecar: " + path.string() + ".ids");
  for (const auto& id : ids) ids_out << id << '\n';
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open embedding file: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw ConfigError("bad magic in embedding file: " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  EmbeddingFile file;
  file.matrix.n = get_u32_le(p + 4);
  file.matrix.d = get_u32_le(p + 8);
  if (file.matrix.n == 0 || file.matrix.d == 0)
    throw ConfigError("empty embedding matrix in file: " + path.string());
  const std::size_t payload = static_cast<std::size_t>(file.matrix.n) * file.matrix.d * 4;
  if (buf.size() - 12 < payload)
    throw ConfigError("truncated embedding payload in file: " + path.string());
  if (buf.size() - 12 > payload)
    throw ConfigError("trailing bytes in embedding file: " + path.string());
  file.matrix.data.resize(static_cast<std::size_t>(file.matrix.n) * file.matrix.d);
  for (std::size_t i = 0; i < file.matrix.data.size(); ++i)
    file.matrix.data[i] = std::bit_cast<float>(get_u32_le(p + 12 + i * 4));

  const auto ids_path = path.string() + ".ids";
  std::ifstream ids_in(ids_path);
  if (!ids_in) throw ConfigError("missing ids sidecar: " + ids_path);
  std::string line;
  while (std::getline(ids_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) file.ids.push_back(line);
  }
  if (file.ids.size() != file.matrix.n)
    throw ConfigError("ids sidecar has " + std::to_string(file.ids.size()) +
                      " ids but matrix has " + std::to_string(file.matrix.n) + " rows");
  return file;
}

namespace {

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (pipe(fds) != 0) throw Error("pipe() failed");
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fds[0] >= 0) ::close(fds[0]);
    fds[0] = -1;
  }
  void close_write() {
    if (fds[1] >= 0) ::close(fds[1]);
    fds[1] = -1;
  }
};

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

double now_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

std::vector<double> parse_embedding_line(const std::string& line, const std::string& path) {
  std::vector<double> values;
  const char* p = line.c_str();
  char* end = nullptr;
  while (*p != '\0') {
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == '\0') break;
    errno = 0;
    double v = std::strtod(p, &end);
    if (end == p || errno == ERANGE || !std::isfinite(v))
      throw Error("extractor emitted a malformed embedding line for path: " + path);
    values.push_back(v);
    p = end;
  }
  if (values.empty())
    throw Error("extractor emitted an empty embedding line for path: " + path);
  return values;
}

}  // namespace

EmbeddingMatrix external_extract(const std::string& command,
                                 const std::vector<std::string>& image_paths,
                                 double timeout_s) {
  if (command.empty()) throw ConfigError("extractor command is empty");
  if (image_paths.empty()) throw ConfigError("no image paths to extract");
  if (!(timeout_s > 0.0)) throw ConfigError("extractor timeout must be positive");

  // The child may exit while we still write; take EPIPE over SIGPIPE.
  static const bool sigpipe_ignored = [] {
    signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  Pipe to_child, from_child;
  const pid_t pid = fork();
  if (pid < 0) throw Error("fork() failed");
  if (pid == 0) {
    dup2(to_child.fds[0], STDIN_FILENO);
    dup2(from_child.fds[1], STDOUT_FILENO);
    ::close(to_child.fds[0]);
    ::close(to_child.fds[1]);
    ::close(from_child.fds[0]);
    ::close(from_child.fds[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  to_child.close_read();
  from_child.close_write();
  set_nonblocking(to_child.fds[1]);
  set_nonblocking(from_child.fds[0]);

  std::string input;
  for (const auto& p : image_paths) {
    input += p;
    input += '\n';
  }
  std::size_t written = 0;
  std::string output;
  std::size_t lines_done = 0;
  bool stdin_open = true;
  bool stdout_open = true;
  const double deadline = now_seconds() + timeout_s;

  auto kill_child = [&] {
    kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
  };

  while (stdout_open) {
    const double remaining = deadline - now_seconds();
    if (remaining <= 0.0) {
      kill_child();
      const std::string& waiting_for =
          lines_done < image_paths.size() ? image_paths[lines_done] : image_paths.back();
      throw Error("extractor timed out while processing path: " + waiting_for);
    }
    pollfd fds[2];
    nfds_t nfds = 0;
    int write_slot = -1, read_slot = -1;
    if (stdin_open) {
      write_slot = static_cast<int>(nfds);
      fds[nfds++] = {to_child.fds[1], POLLOUT, 0};
    }
    read_slot = static_cast<int>(nfds);
    fds[nfds++] = {from_child.fds[0], POLLIN, 0};

    const int timeout_ms = static_cast<int>(std::min(remaining * 1000.0, 1000.0)) + 1;
    const int rc = poll(fds, nfds, timeout_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      kill_child();
      throw Error("poll() failed while talking to extractor");
    }
    if (stdin_open && (fds[write_slot].revents & (POLLOUT | POLLERR))) {
      const ssize_t nw = write(to_child.fds[1], input.data() + written,
                               std::min<std::size_t>(input.size() - written, 65536));
      if (nw > 0) {
        written += static_cast<std::size_t>(nw);
      } else if (nw < 0 && errno != EAGAIN && errno != EINTR) {
        // Child closed stdin; stop feeding, keep draining its output.
        stdin_open = false;
        to_child.close_write();
      }
      if (written == input.size()) {
        stdin_open = false;
        to_child.close_write();
      }
    }
    if (fds[read_slot].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      const ssize_t nr = read(from_child.fds[0], buf, sizeof(buf));
      if (nr > 0) {
        output.append(buf, static_cast<std::size_t>(nr));
        for (char c : std::string_view(buf, static_cast<std::size_t>(nr)))
          if (c == '\n') ++lines_done;
      } else if (nr == 0) {
        stdout_open = false;
      } else if (errno != EAGAIN && errno != EINTR) {
        kill_child();
        throw Error("read() failed while talking to extractor");
      }
    }
  }

  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw Error("extractor exited with status " + std::to_string(code));
  }

  std::vector<std::vector<double>> rows;
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (rows.size() >= image_paths.size())
      throw Error("extractor emitted more lines than input paths");
    rows.push_back(parse_embedding_line(line, image_paths[rows.size()]));
  }
  if (rows.size() != image_paths.size())
    throw Error("extractor emitted " + std::to_string(rows.size()) + " lines for " +
                std::to_string(image_paths.size()) +
                " paths; first missing: " + image_paths[rows.size()]);

  EmbeddingMatrix m;
  m.n = static_cast<std::uint32_t>(rows.size());
  m.d = static_cast<std::uint32_t>(rows[0].size());
  m.data.reserve(static_cast<std::size_t>(m.n) * m.d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.d)
      throw Error("dimension mismatch: path " + image_paths[i] + " produced " +
                  std::to_string(rows[i].size()) + " values, expected " +
                  std::to_string(m.d));
    for (double v : rows[i]) m.data.push_back(static_cast<float>(v));
  }
  return m;
}

void SynthConfig::validate() const {
  if (k_classes < 2) throw ConfigError("synth: k_classes must be >= 2");
  if (dim < 2) throw ConfigError("synth: dim must be >= 2");
  if (n_per_class < 1) throw ConfigError("synth: n_per_class must be positive");
  if (n_hybrid < 1) throw ConfigError("synth: n_hybrid must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("synth: noise_sigma must be finite and non-negative");
  if (!(mimic_shift >= 0.0) || !std::isfinite(mimic_shift))
    throw ConfigError("synth: mimic_shift must be finite and non-negative");
}

namespace {

std::vector<double> random_direction(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm < 1e-24);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

SynthDataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const int k = cfg.k_classes;
  const int d = cfg.dim;

  std::vector<TaxonClass> classes;
  for (int c = 0; c < k; ++c) classes.push_back({"sub" + std::to_string(c), "A"});
  Taxonomy taxonomy{std::move(classes)};

  const double radius = cfg.noise_sigma > 0.0 ? 8.0 * cfg.noise_sigma : 1.0;
  Rng mean_rng(derive_seed(cfg.seed, "means"));
  std::vector<std::vector<double>> means_a(static_cast<std::size_t>(k));
  for (auto& mu : means_a) {
    mu = random_direction(mean_rng, d);
    for (auto& x : mu) x *= radius;
  }
  Rng shift_rng(derive_seed(cfg.seed, "mimic"));
  std::vector<std::vector<double>> means_b(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    auto delta = random_direction(shift_rng, d);
    means_b[c] = means_a[c];
    for (int j = 0; j < d; ++j) means_b[c][static_cast<std::size_t>(j)] += cfg.mimic_shift * delta[static_cast<std::size_t>(j)];
  }

  SynthDataset ds{std::move(taxonomy), {}, {}, means_a, means_b};
  const std::size_t per_species =
      static_cast<std::size_t>(k) * cfg.n_per_class + cfg.n_hybrid;
  ds.embeddings.n = static_cast<std::uint32_t>(2 * per_species);
  ds.embeddings.d = static_cast<std::uint32_t>(d);
  ds.embeddings.data.reserve(static_cast<std::size_t>(ds.embeddings.n) * ds.embeddings.d);
  ds.records.reserve(2 * per_species);

  auto emit_species = [&](const std::string& species,
                          const std::vector<std::vector<double>>& means) {
    Rng pair_rng(derive_seed(cfg.seed, "pairs_" + species));
    Rng noise_rng(derive_seed(cfg.seed, "noise_" + species));
    auto push_row = [&](const std::vector<double>& mean) {
      for (int j = 0; j < d; ++j) {
        const double noise = cfg.noise_sigma * noise_rng.normal();
        ds.embeddings.data.push_back(
            static_cast<float>(mean[static_cast<std::size_t>(j)] + noise));
      }
    };
    for (int c = 0; c < k; ++c) {
      for (int i = 0; i < cfg.n_per_class; ++i) {
        SampleRecord rec;
        rec.id = species + "_sub" + std::to_string(c) + "_" + std::to_string(i);
        rec.label = HybridLabel::non_hybrid(c);
        rec.species_group = species;
        rec.source = std::to_string(ds.records.size());
        ds.records.push_back(std::move(rec));
        push_row(means[static_cast<std::size_t>(c)]);
      }
    }
    std::vector<double> midpoint(static_cast<std::size_t>(d));
    for (int i = 0; i < cfg.n_hybrid; ++i) {
      const int a = static_cast<int>(pair_rng.uniform_below(static_cast<std::uint64_t>(k)));
      int b = static_cast<int>(pair_rng.uniform_below(static_cast<std::uint64_t>(k - 1)));
      if (b >= a) ++b;
      SampleRecord rec;
      rec.id = species + "_hyb_" + std::to_string(i);
      rec.label = HybridLabel::hybrid(a, b);
      rec.species_group = species;
      rec.source = std::to_string(ds.records.size());
      ds.records.push_back(std::move(rec));
      for (int j = 0; j < d; ++j)
        midpoint[static_cast<std::size_t>(j)] =
            0.5 * (means[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] +
                   means[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]);
      push_row(midpoint);
    }
  };
  emit_species("A", means_a);
  emit_species("B", means_b);
  return ds;
}

}  // namespace hybridet
