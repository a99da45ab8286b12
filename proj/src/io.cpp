#include "pardec/io.hpp"

#include "pardec/errors.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pardec {

std::string format_version() {
    return std::to_string(kFormatMajor) + "." + std::to_string(kFormatMinor);
}

Json make_header(const char * format, const Json & config) {
    return Json{{"format", format}, {"version", format_version()}, {"config", config}};
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    return Json(v).dump();
}

namespace {

struct LineReader {
    std::istream &    in;
    const std::string name;
    int               lineno = 0;

    // Next non-empty line parsed as JSON; false at end of input.
    bool next(Json & out) {
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                out = Json::parse(line);
            } catch (const Json::parse_error & e) {
                throw ParseError(where() + ": " + e.what());
            }
            return true;
        }
        if (in.bad()) {
            throw IoError("read failure in " + name);
        }
        return false;
    }

    std::string where() const { return name + ":" + std::to_string(lineno); }
};

Json read_header(LineReader & r, const char * format) {
    Json h;
    if (!r.next(h)) {
        throw ParseError(r.name + ": missing header");
    }
    if (!h.is_object() || h.value("format", "") != format) {
        throw ParseError(r.where() + ": expected a " + std::string(format) + " header");
    }
    const std::string v     = h.value("version", "");
    const auto        dot   = v.find('.');
    int               major = -1;
    try {
        major = std::stoi(v.substr(0, dot));
    } catch (const std::exception &) {
        throw ParseError(r.where() + ": malformed version '" + v + "'");
    }
    if (major != kFormatMajor) {
        throw ParseError(r.where() + ": unsupported " + std::string(format) + " major version " + std::to_string(major));
    }
    return h.value("config", Json::object());
}

template <typename T> T field(const Json & j, const char * key, const LineReader & r) {
    if (!j.contains(key)) {
        throw ParseError(r.where() + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception & e) {
        throw ParseError(r.where() + ": bad field '" + key + "': " + e.what());
    }
}

}  // namespace

void write_trace(std::ostream & out, const DecodeTrace & trace, const Json & config) {
    out << make_header(kTraceFormat, config).dump() << '\n';
    for (const StepRecord & s : trace.steps) {
        Json rec{{"step", s.step_index},
                 {"block", s.block_index},
                 {"block_step", s.block_step},
                 {"block_begin", s.block_begin},
                 {"committed", s.committed},
                 {"committed_tokens", s.committed_tokens},
                 {"committed_confidences", s.committed_confidences},
                 {"fallback", s.fallback},
                 {"predictions", s.predictions},
                 {"confidences", s.confidences}};
        out << rec.dump() << '\n';
    }
    Json summary{{"summary",
                  {{"forward_calls", trace.forward_calls},
                   {"fallback_events", trace.fallback_events},
                   {"per_block_steps", trace.per_block_steps},
                   {"final_output", trace.final_output}}}};
    out << summary.dump() << '\n';
}

DecodeTrace read_trace(std::istream & in, const std::string & name) {
    LineReader r{in, name};
    read_header(r, kTraceFormat);
    DecodeTrace t;
    bool        have_summary = false;
    Json        j;
    while (r.next(j)) {
        if (j.contains("summary")) {
            const Json & s    = j.at("summary");
            t.forward_calls   = field<int>(s, "forward_calls", r);
            t.fallback_events = field<int>(s, "fallback_events", r);
            t.per_block_steps = field<std::vector<int>>(s, "per_block_steps", r);
            t.final_output    = field<Tokens>(s, "final_output", r);
            have_summary      = true;
            continue;
        }
        StepRecord s;
        s.step_index            = field<int>(j, "step", r);
        s.block_index           = field<int>(j, "block", r);
        s.block_step            = field<int>(j, "block_step", r);
        s.block_begin           = field<int>(j, "block_begin", r);
        s.committed             = field<std::vector<int>>(j, "committed", r);
        s.committed_tokens      = field<Tokens>(j, "committed_tokens", r);
        s.committed_confidences = field<std::vector<double>>(j, "committed_confidences", r);
        s.fallback              = field<bool>(j, "fallback", r);
        s.predictions           = field<Tokens>(j, "predictions", r);
        s.confidences           = field<std::vector<double>>(j, "confidences", r);
        t.steps.push_back(std::move(s));
    }
    if (!have_summary) {
        throw ParseError(name + ": trace has no summary record");
    }
    return t;
}

void write_dataset(std::ostream & out, std::span<const TrainingSample> samples,
                   std::span<const SampleProvenance> provenance, const Json & config) {
    if (samples.size() != provenance.size()) {
        throw AlignmentError("samples and provenance differ in count");
    }
    out << make_header(kDatasetFormat, config).dump() << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto & s = samples[i];
        Json rec{{"conf", s.conf},
                 {"labels", s.labels},
                 {"mask", s.mask_active},
                 {"prompt", provenance[i].prompt},
                 {"block", provenance[i].block},
                 {"step", provenance[i].step}};
        out << rec.dump() << '\n';
    }
}

Dataset read_dataset(std::istream & in, const std::string & name) {
    LineReader r{in, name};
    Dataset    d;
    d.config = read_header(r, kDatasetFormat);
    Json j;
    while (r.next(j)) {
        TrainingSample s;
        s.conf        = field<std::vector<double>>(j, "conf", r);
        s.labels      = field<std::vector<std::uint8_t>>(j, "labels", r);
        s.mask_active = field<std::vector<std::uint8_t>>(j, "mask", r);
        if (s.labels.size() != s.conf.size() || s.mask_active.size() != s.conf.size()) {
            throw DatasetError(r.where() + ": conf, labels and mask differ in width");
        }
        if (!d.samples.empty() && s.conf.size() != d.samples.front().conf.size()) {
            throw DatasetError(r.where() + ": sample width differs from the first sample");
        }
        for (std::size_t i = 0; i < s.conf.size(); ++i) {
            if (!(s.conf[i] >= 0.0 && s.conf[i] <= 1.0) || s.labels[i] > 1 || s.mask_active[i] > 1) {
                throw DatasetError(r.where() + ": value out of range at position " + std::to_string(i));
            }
        }
        d.provenance.push_back({field<int>(j, "prompt", r), field<int>(j, "block", r), field<int>(j, "step", r)});
        d.samples.push_back(std::move(s));
    }
    return d;
}

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'D', 'F', 'I', 'L', 'T', 'E', 'R'};

void put_u32(std::ostream & out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void put_u16(std::ostream & out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

void put_f32(std::ostream & out, double v) {
    const float   f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(out, bits);
}

void put_string(std::ostream & out, const std::string & s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void get_bytes(std::istream & in, char * dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw ParseError("weights file truncated");
    }
}

std::uint32_t get_u32(std::istream & in) {
    unsigned char b[4];
    get_bytes(in, reinterpret_cast<char *>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream & in) {
    unsigned char b[2];
    get_bytes(in, reinterpret_cast<char *>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

double get_f32(std::istream & in) {
    const std::uint32_t bits = get_u32(in);
    float               f;
    std::memcpy(&f, &bits, sizeof f);
    return static_cast<double>(f);
}

std::string get_string(std::istream & in, std::uint32_t limit) {
    const std::uint32_t n = get_u32(in);
    if (n > limit) {
        throw ParseError("weights file string field too long");
    }
    std::string s(n, '\0');
    get_bytes(in, s.data(), n);
    return s;
}

}  // namespace

void save_weights(std::ostream & out, const FilterModel & model) {
    out.write(kMagic.data(), kMagic.size());
    put_u16(out, kFormatMajor);
    put_u16(out, kFormatMinor);
    const auto widths = model.widths();
    put_u32(out, static_cast<std::uint32_t>(model.depth()));
    for (int w : widths) {
        put_u32(out, static_cast<std::uint32_t>(w));
    }
    put_string(out, activation_name(model.activation()));
    put_string(out, model.fingerprint);
    for (const auto & l : model.layers()) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                put_f32(out, l.weight(r, c));
            }
        }
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
            put_f32(out, l.bias(i));
        }
    }
    if (!out) {
        throw IoError("failed writing weights");
    }
}

FilterModel load_weights(std::istream & in) {
    std::array<char, 8> magic{};
    get_bytes(in, magic.data(), magic.size());
    if (magic != kMagic) {
        throw ParseError("not a filter weights file");
    }
    const int major = get_u16(in);
    get_u16(in);
    if (major != kFormatMajor) {
        throw ParseError("unsupported weights major version " + std::to_string(major));
    }
    const std::uint32_t depth = get_u32(in);
    if (depth == 0 || depth > 64) {
        throw ParseError("implausible filter depth " + std::to_string(depth));
    }
    std::vector<int> widths;
    for (std::uint32_t i = 0; i <= depth; ++i) {
        const std::uint32_t w = get_u32(in);
        if (w == 0 || w > 1u << 16) {
            throw ParseError("implausible layer width " + std::to_string(w));
        }
        widths.push_back(static_cast<int>(w));
    }
    if (widths.front() != widths.back()) {
        throw ParseError("filter input and output widths differ");
    }
    for (std::size_t i = 2; i < widths.size() - 1; ++i) {
        if (widths[i] != widths[1]) {
            throw ParseError("hidden layers must share one width");
        }
    }
    const Activation act    = parse_activation(get_string(in, 64));
    const int        hidden = depth == 1 ? widths.front() : widths[1];
    FilterModel      model(widths.front(), hidden, static_cast<int>(depth), act);
    model.fingerprint = get_string(in, 1u << 20);
    for (auto & l : model.layers()) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                l.weight(r, c) = get_f32(in);
            }
        }
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
            l.bias(i) = get_f32(in);
        }
    }
    if (!model.all_finite()) {
        throw ParseError("weights file holds non-finite parameters");
    }
    return model;
}

void save_weights_file(const std::filesystem::path & path, const FilterModel & model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    save_weights(out, model);
}

FilterModel load_weights_file(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return load_weights(in);
}

void write_loss_curve(std::ostream & out, const std::vector<EpochLoss> & history, const Json & config) {
    out << "# " << make_header(kLossFormat, config).dump() << '\n';
    out << "epoch,train_loss,val_loss\n";
    for (const auto & e : history) {
        out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
    }
}

}  // namespace pardec
