#include "ck/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ck {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', 'K', 'T', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("tensor container: truncated header");
    return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kMagic, 4);
    write_u64(os, static_cast<std::uint64_t>(t.shape.size()));
    for (std::int64_t d : t.shape) write_u64(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!os) throw DataError("tensor container: write failed");
}

TensorPtr read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("tensor container: bad magic bytes");
    }
    const std::uint64_t rank = read_u64(is);
    if (rank > 8) throw DataError("tensor container: implausible rank " + std::to_string(rank));
    std::vector<std::int64_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::int64_t>(read_u64(is));
    std::vector<double> data(static_cast<std::size_t>(numel(shape)));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw DataError("tensor container: truncated payload");
    return make_tensor(std::move(shape), std::move(data));
}

void save_tensors(const std::string& path, const std::vector<TensorPtr>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_tensors: cannot open " + path);
    for (const auto& t : tensors) write_tensor(os, *t);
}

std::vector<TensorPtr> load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_tensors: cannot open " + path);
    std::vector<TensorPtr> out;
    while (is.peek() != std::char_traits<char>::eof()) {
        out.push_back(read_tensor(is));
    }
    return out;
}

}  // namespace ck
