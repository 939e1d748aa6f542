#include "laser/maze.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <random>
#include <set>

#include "laser/binary_io.hpp"
#include "laser/error.hpp"

namespace laser::maze {
namespace {

constexpr char kMagic[] = "LASR1";
constexpr std::size_t kMagicLen = 5;

}  // namespace

std::size_t MazeInstance::find(Token t) const {
  const auto it = std::find(input.begin(), input.end(), static_cast<std::uint8_t>(t));
  if (it == input.end()) throw Error(ErrorKind::ShapeMismatch, "maze has no such token");
  return static_cast<std::size_t>(it - input.begin());
}

MazeInstance generate(std::size_t width, std::size_t height, std::uint64_t seed) {
  if (width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0) {
    throw Error(ErrorKind::InvalidConfig, "maze dimensions must be odd and >= 5");
  }
  std::mt19937_64 rng(seed);
  MazeInstance m;
  m.width = width;
  m.height = height;
  m.input.assign(width * height, Wall);

  const std::size_t node_rows = height / 2, node_cols = width / 2;
  auto cell_of = [&](std::size_t nr, std::size_t nc) { return (2 * nr + 1) * width + (2 * nc + 1); };
  std::vector<bool> visited(node_rows * node_cols, false);
  std::vector<std::size_t> stack;

  std::uniform_int_distribution<std::size_t> pick_node(0, node_rows * node_cols - 1);
  const std::size_t root = pick_node(rng);
  visited[root] = true;
  m.input[cell_of(root / node_cols, root % node_cols)] = Passage;
  stack.push_back(root);

  static constexpr std::array<std::array<int, 2>, 4> kSteps{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  while (!stack.empty()) {
    const std::size_t node = stack.back();
    const int nr = static_cast<int>(node / node_cols), nc = static_cast<int>(node % node_cols);
    std::vector<std::size_t> options;
    for (const auto& s : kSteps) {
      const int r = nr + s[0], c = nc + s[1];
      if (r < 0 || c < 0 || r >= static_cast<int>(node_rows) || c >= static_cast<int>(node_cols)) continue;
      const std::size_t next = static_cast<std::size_t>(r) * node_cols + static_cast<std::size_t>(c);
      if (!visited[next]) options.push_back(next);
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    const std::size_t next = options[pick(rng)];
    const std::size_t a = cell_of(node / node_cols, node % node_cols);
    const std::size_t b = cell_of(next / node_cols, next % node_cols);
    m.input[(a + b) / 2] = Passage;  // wall cell between the two lattice nodes
    m.input[b] = Passage;
    visited[next] = true;
    stack.push_back(next);
  }

  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < m.input.size(); ++i) {
    if (m.input[i] == Passage) open.push_back(i);
  }
  std::uniform_int_distribution<std::size_t> pick_open(0, open.size() - 1);
  const std::size_t start = open[pick_open(rng)];
  std::size_t goal = start;
  while (goal == start) goal = open[pick_open(rng)];
  m.input[start] = Start;
  m.input[goal] = Goal;

  m.target = m.input;
  const auto path = solve_bfs(m);
  for (std::size_t i = 1; i + 1 < path.size(); ++i) m.target[path[i]] = Path;
  return m;
}

std::vector<std::size_t> solve_bfs(const MazeInstance& maze, std::size_t from, std::size_t to) {
  const std::size_t n = maze.cells();
  const std::size_t w = maze.width;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, kNone);
  std::queue<std::size_t> frontier;
  parent[from] = from;
  frontier.push(from);
  while (!frontier.empty()) {
    const std::size_t cur = frontier.front();
    frontier.pop();
    if (cur == to) break;
    const std::size_t r = cur / w, c = cur % w;
    std::array<std::size_t, 4> nbrs{kNone, kNone, kNone, kNone};
    if (r > 0) nbrs[0] = cur - w;
    if (r + 1 < maze.height) nbrs[1] = cur + w;
    if (c > 0) nbrs[2] = cur - 1;
    if (c + 1 < w) nbrs[3] = cur + 1;
    for (std::size_t next : nbrs) {
      if (next == kNone || parent[next] != kNone || maze.input[next] == Wall) continue;
      parent[next] = cur;
      frontier.push(next);
    }
  }
  if (parent[to] == kNone) throw Error(ErrorKind::Unreachable, "goal not reachable from start");
  std::vector<std::size_t> path{to};
  while (path.back() != from) path.push_back(parent[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::size_t> solve_bfs(const MazeInstance& maze) {
  return solve_bfs(maze, maze.find(Start), maze.find(Goal));
}

std::vector<MazeInstance> generate_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 seeds(seed);
  std::vector<MazeInstance> out;
  std::set<std::vector<std::uint8_t>> seen;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 100 * (count + 10)) {
      throw Error(ErrorKind::InvalidConfig, "cannot find enough distinct mazes of this size");
    }
    MazeInstance m = generate(size, size, seeds());
    if (!seen.insert(m.input).second) continue;
    out.push_back(std::move(m));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<MazeInstance>& all, std::size_t train_count, std::size_t val_count) {
  if (train_count + val_count > all.size()) {
    throw Error(ErrorKind::InvalidConfig, "dataset has " + std::to_string(all.size()) + " instances, split needs " +
                                              std::to_string(train_count + val_count));
  }
  DatasetSplit s;
  s.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_count));
  s.val.assign(all.begin() + static_cast<std::ptrdiff_t>(train_count),
               all.begin() + static_cast<std::ptrdiff_t>(train_count + val_count));
  return s;
}

std::vector<std::uint8_t> encode_dataset(const std::vector<MazeInstance>& instances) {
  io::ByteWriter w;
  w.put_string(std::string(kMagic, kMagicLen));
  const std::size_t width = instances.empty() ? 0 : instances.front().width;
  const std::size_t height = instances.empty() ? 0 : instances.front().height;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(instances.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(height));
  for (const MazeInstance& m : instances) {
    if (m.width != width || m.height != height) {
      throw Error(ErrorKind::ShapeMismatch, "all instances in a dataset must share width and height");
    }
    w.put_bytes(m.input);
    w.put_bytes(m.target);
  }
  return w.take();
}

std::vector<MazeInstance> decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  const auto magic = r.get_bytes(kMagicLen, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw CorruptFileError(0, "bad magic");
  const std::uint32_t count = r.get<std::uint32_t>("count");
  const std::uint32_t width = r.get<std::uint32_t>("width");
  const std::uint32_t height = r.get<std::uint32_t>("height");
  const std::size_t cells = static_cast<std::size_t>(width) * height;
  if (count > 0 && cells == 0) throw CorruptFileError(r.offset(), "zero-sized grid");

  std::vector<MazeInstance> out;
  out.reserve(std::min<std::size_t>(count, r.remaining() / std::max<std::size_t>(1, 2 * cells)));
  for (std::uint32_t i = 0; i < count; ++i) {
    MazeInstance m;
    m.width = width;
    m.height = height;
    for (auto* grid : {&m.input, &m.target}) {
      const std::size_t at = r.offset();
      const auto raw = r.get_bytes(cells, "grid");
      for (std::size_t j = 0; j < cells; ++j) {
        if (raw[j] >= kVocabSize) throw CorruptFileError(at + j, "token out of range");
      }
      grid->assign(raw.begin(), raw.end());
    }
    out.push_back(std::move(m));
  }
  if (r.remaining() != 0) throw CorruptFileError(r.offset(), "trailing bytes");
  return out;
}

void write_dataset(const std::vector<MazeInstance>& instances, const std::string& path) {
  io::write_file(path, encode_dataset(instances));
}

std::vector<MazeInstance> read_dataset(const std::string& path) { return decode_dataset(io::read_file(path)); }

std::string render(const std::vector<std::uint8_t>& grid, std::size_t width) {
  static constexpr char kGlyph[] = {'#', '.', 'S', 'G', '*'};
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += grid[i] < kVocabSize ? kGlyph[grid[i]] : '?';
    if ((i + 1) % width == 0) out += '\n';
  }
  return out;
}

}  // namespace laser::maze
