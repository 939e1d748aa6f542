#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace laser::maze {

enum Token : std::uint8_t { Wall = 0, Passage = 1, Start = 2, Goal = 3, Path = 4 };
inline constexpr std::size_t kVocabSize = 5;

/// One maze: `input` is the unsolved grid, `target` the same grid with the
/// interior cells of the shortest start->goal path overwritten by Path.
struct MazeInstance {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> input;
  std::vector<std::uint8_t> target;

  std::size_t cells() const noexcept { return width * height; }
  std::size_t find(Token t) const;
  bool operator==(const MazeInstance&) const = default;
};

/// Randomized depth-first carving on the odd-coordinate lattice, so passages
/// form a spanning tree and every pair of cells has exactly one simple path.
/// Start and goal are distinct passage cells chosen uniformly.
MazeInstance generate(std::size_t width, std::size_t height, std::uint64_t seed);

/// Shortest start->goal path (cell indices, both endpoints included) by BFS
/// over non-wall cells. Throws ErrorKind::Unreachable.
std::vector<std::size_t> solve_bfs(const MazeInstance& maze);
std::vector<std::size_t> solve_bfs(const MazeInstance& maze, std::size_t from, std::size_t to);

/// `count` distinct square mazes; instance i is generated from a seed drawn
/// from a generator seeded with `seed`.
std::vector<MazeInstance> generate_dataset(std::size_t count, std::size_t size, std::uint64_t seed);

struct DatasetSplit {
  std::vector<MazeInstance> train;
  std::vector<MazeInstance> val;
};
// First train_count instances train, the next val_count validation.
DatasetSplit split_dataset(const std::vector<MazeInstance>& all, std::size_t train_count, std::size_t val_count);

/// "LASR1", u32 count, u32 width, u32 height, then per instance the input and
/// target token bytes.
std::vector<std::uint8_t> encode_dataset(const std::vector<MazeInstance>& instances);
std::vector<MazeInstance> decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const std::vector<MazeInstance>& instances, const std::string& path);
std::vector<MazeInstance> read_dataset(const std::string& path);

// Multi-line picture for debugging and CLI output.
std::string render(const std::vector<std::uint8_t>& grid, std::size_t width);

}  // namespace laser::maze
