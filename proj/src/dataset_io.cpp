#include "lpattack/dataset_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "lpattack/util.hpp"

namespace lpa {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'D', 'S'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > size)
            throw TruncatedFile(std::string("dataset file ends inside ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    if (data.examples.empty()) throw std::invalid_argument("refusing to save an empty dataset");
    std::string out;
    out.reserve(36 + data.examples.size() * (4 + data.examples[0].image.size() * 4));
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kVersion));
    out.push_back(static_cast<char>(data.split));
    out.append(10, '\0');
    put_u32(out, static_cast<std::uint32_t>(data.height()));
    put_u32(out, static_cast<std::uint32_t>(data.width()));
    put_u32(out, static_cast<std::uint32_t>(data.channels()));
    put_u32(out, static_cast<std::uint32_t>(data.num_classes));
    put_u32(out, static_cast<std::uint32_t>(data.examples.size()));
    for (const auto& ex : data.examples) {
        put_u32(out, static_cast<std::uint32_t>(ex.label));
        for (double v : ex.image.data)
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    write_file_atomic(path, out);
}

Dataset load_dataset(const std::filesystem::path& path) {
    const std::string blob = read_file(path);
    Reader in{reinterpret_cast<const unsigned char*>(blob.data()), blob.size()};
    in.need(16, "the header");
    if (std::memcmp(blob.data(), kMagic, 4) != 0)
        throw MalformedHeader("not a dataset file (bad magic)");
    if (static_cast<std::uint8_t>(blob[4]) != kVersion)
        throw MalformedHeader("unsupported dataset version " +
                              std::to_string(static_cast<unsigned>(blob[4])));
    const std::uint8_t split_tag = static_cast<std::uint8_t>(blob[5]);
    if (split_tag > 1)
        throw MalformedHeader("unknown split tag " + std::to_string(split_tag));
    in.pos = 16;

    const std::uint32_t h = in.u32("the shape");
    const std::uint32_t w = in.u32("the shape");
    const std::uint32_t c = in.u32("the shape");
    const std::uint32_t k = in.u32("the class count");
    const std::uint32_t n = in.u32("the example count");
    if (h == 0 || w == 0 || c == 0 || k == 0 || n == 0)
        throw MalformedHeader("dataset header contains a zero dimension");
    // the payload must be exactly what the header promises
    const std::size_t record = 4 + static_cast<std::size_t>(h) * w * c * 4;
    if (blob.size() - in.pos < record * n)
        throw TruncatedFile("dataset payload is " + std::to_string(blob.size() - in.pos) +
                            " bytes, header promises " + std::to_string(record * n));
    if (blob.size() - in.pos > record * n)
        throw MalformedHeader("dataset has " +
                              std::to_string(blob.size() - in.pos - record * n) +
                              " trailing bytes past the promised payload");

    Dataset data;
    data.num_classes = static_cast<int>(k);
    data.split = static_cast<Split>(split_tag);
    data.examples.reserve(n);
    const std::size_t values = static_cast<std::size_t>(h) * w * c;
    for (std::uint32_t e = 0; e < n; ++e) {
        const std::uint32_t label = in.u32("an example label");
        if (label >= k)
            throw ValueOutOfRange("label " + std::to_string(label) + " >= num_classes " +
                                  std::to_string(k));
        std::vector<double> buf(values);
        for (std::size_t i = 0; i < values; ++i) {
            const float v = in.f32("the pixel data");
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw ValueOutOfRange("intensity " + std::to_string(v) + " outside [0,1]");
            buf[i] = static_cast<double>(v);
        }
        data.examples.push_back({Image(static_cast<int>(h), static_cast<int>(w),
                                       static_cast<int>(c), std::move(buf)),
                                 static_cast<int>(label)});
    }
    data.validate();
    return data;
}

}  // namespace lpa
