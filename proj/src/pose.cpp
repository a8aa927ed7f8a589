#include "signflow/pose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "signflow/error.hpp"

namespace signflow {

using nlohmann::json;

void Skeleton::validate() const {
    if (joints <= 0) throw ValueError("skeleton: joint count must be positive");
    for (const auto& [parent, child] : bones) {
        if (parent < 0 || parent >= joints || child < 0 || child >= joints) {
            throw ValueError("skeleton: bone (" + std::to_string(parent) + ", " +
                             std::to_string(child) + ") references a joint outside [0, " +
                             std::to_string(joints) + ")");
        }
    }
    std::vector<char> seen(static_cast<std::size_t>(joints), 0);
    for (const auto& [name, idx] : groups) {
        if (idx.empty()) throw ValueError("skeleton: group '" + name + "' is empty");
        for (int i : idx) {
            if (i < 0 || i >= joints) {
                throw ValueError("skeleton: group '" + name + "' references joint " +
                                 std::to_string(i) + " outside [0, " + std::to_string(joints) + ")");
            }
            if (seen[static_cast<std::size_t>(i)]) {
                throw ValueError("skeleton: joint " + std::to_string(i) +
                                 " appears in more than one group");
            }
            seen[static_cast<std::size_t>(i)] = 1;
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw ValueError("skeleton: groups do not cover all joints");
    }
}

const std::vector<int>& Skeleton::group_indices(const std::string& name) const {
    for (const auto& [gname, idx] : groups) {
        if (gname == name) return idx;
    }
    throw ValueError("skeleton: no group named '" + name + "'");
}

namespace {

std::vector<int> index_range(int lo, int hi) {
    std::vector<int> out(static_cast<std::size_t>(hi - lo));
    std::iota(out.begin(), out.end(), lo);
    return out;
}

}  // namespace

Skeleton Skeleton::desk_default() {
    Skeleton s;
    s.joints = 54;
    // Face: chain over the 12 face landmarks.
    for (int i = 0; i < 11; ++i) s.bones.emplace_back(i, i + 1);
    // Body: neck 12, shoulders 13/14, elbows 15/16, wrists 17/18, pelvis 19.
    s.bones.emplace_back(12, 13);
    s.bones.emplace_back(12, 14);
    s.bones.emplace_back(13, 15);
    s.bones.emplace_back(14, 16);
    s.bones.emplace_back(15, 17);
    s.bones.emplace_back(16, 18);
    s.bones.emplace_back(12, 19);
    // Hands: root + 4 fingers x 4 joints each, left at 20, right at 37.
    for (int root : {20, 37}) {
        for (int f = 0; f < 4; ++f) {
            const int base = root + 1 + 4 * f;
            s.bones.emplace_back(root, base);
            for (int k = 0; k < 3; ++k) s.bones.emplace_back(base + k, base + k + 1);
        }
    }
    // Wrist-to-hand links.
    s.bones.emplace_back(17, 20);
    s.bones.emplace_back(18, 37);

    s.groups = {{"face", index_range(0, 12)},
                {"body", index_range(12, 20)},
                {"hands", index_range(20, 54)}};
    s.validate();
    return s;
}

Skeleton Skeleton::regrouped(int expert_count) const {
    Skeleton s = *this;
    if (expert_count == static_cast<int>(groups.size())) return s;
    switch (expert_count) {
        case 1: {
            s.groups = {{"pose", index_range(0, joints)}};
            break;
        }
        case 3: {
            if (joints != 54) throw ValueError("regrouped(3): only defined for the 54-joint skeleton");
            s.groups = {{"face", index_range(0, 12)},
                        {"body", index_range(12, 20)},
                        {"hands", index_range(20, 54)}};
            break;
        }
        case 4: {
            if (joints != 54) throw ValueError("regrouped(4): only defined for the 54-joint skeleton");
            s.groups = {{"face", index_range(0, 12)},
                        {"body", index_range(12, 20)},
                        {"left_hand", index_range(20, 37)},
                        {"right_hand", index_range(37, 54)}};
            break;
        }
        default:
            throw ValueError("regrouped: supported expert counts are 1, 3, 4; got " +
                             std::to_string(expert_count));
    }
    s.validate();
    return s;
}

std::map<std::string, std::vector<Keypoint>> split_articulators(const PoseFrame& frame,
                                                                const Skeleton& skeleton) {
    if (frame.joint_count() != skeleton.joints) {
        throw ShapeError("split_articulators: frame has " + std::to_string(frame.joint_count()) +
                         " joints, skeleton expects " + std::to_string(skeleton.joints));
    }
    std::map<std::string, std::vector<Keypoint>> out;
    for (const auto& [name, idx] : skeleton.groups) {
        std::vector<Keypoint> part;
        part.reserve(idx.size());
        for (int i : idx) part.push_back(frame.keypoints[static_cast<std::size_t>(i)]);
        out.emplace(name, std::move(part));
    }
    return out;
}

PoseFrame merge_articulators(const std::map<std::string, std::vector<Keypoint>>& parts,
                             const Skeleton& skeleton) {
    skeleton.validate();  // rejects overlapping or non-covering groups up front
    if (parts.size() != skeleton.groups.size()) {
        std::string have;
        for (const auto& [name, _] : parts) have += (have.empty() ? "" : ", ") + name;
        throw ValueError("merge_articulators: expected " + std::to_string(skeleton.groups.size()) +
                         " groups, got " + std::to_string(parts.size()) + " (" + have + ")");
    }
    PoseFrame frame;
    frame.keypoints.resize(static_cast<std::size_t>(skeleton.joints));
    for (const auto& [name, idx] : skeleton.groups) {
        auto it = parts.find(name);
        if (it == parts.end()) throw ValueError("merge_articulators: missing group '" + name + "'");
        if (it->second.size() != idx.size()) {
            throw ValueError("merge_articulators: group '" + name + "' has " +
                             std::to_string(it->second.size()) + " keypoints, expected " +
                             std::to_string(idx.size()));
        }
        for (std::size_t k = 0; k < idx.size(); ++k) {
            frame.keypoints[static_cast<std::size_t>(idx[k])] = it->second[k];
        }
    }
    return frame;
}

std::vector<BoneVector> bone_vectors(const PoseFrame& frame, const Skeleton& skeleton) {
    if (frame.joint_count() != skeleton.joints) {
        throw ShapeError("bone_vectors: frame has " + std::to_string(frame.joint_count()) +
                         " joints, skeleton expects " + std::to_string(skeleton.joints));
    }
    std::vector<BoneVector> out;
    out.reserve(skeleton.bones.size());
    for (const auto& [parent, child] : skeleton.bones) {
        const Keypoint& p = frame.keypoints[static_cast<std::size_t>(parent)];
        const Keypoint& c = frame.keypoints[static_cast<std::size_t>(child)];
        BoneVector bv;
        const double dx = c.x - p.x;
        const double dy = c.y - p.y;
        bv.length = std::hypot(dx, dy);
        if (bv.length == 0.0) {
            bv.degenerate = true;
        } else {
            bv.dx = dx / bv.length;
            bv.dy = dy / bv.length;
        }
        out.push_back(bv);
    }
    return out;
}

// ---- serialization ------------------------------------------------------

namespace {

[[noreturn]] void record_error(int line, const std::string& field, const std::string& what) {
    throw DataError("line " + std::to_string(line) + ": field '" + field + "': " + what);
}

}  // namespace

PoseSequence sequence_from_json_line(const std::string& line, int line_number) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError("line " + std::to_string(line_number) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) record_error(line_number, "<record>", "expected a JSON object");

    PoseSequence seq;
    if (!j.contains("frames") || !j["frames"].is_array()) {
        record_error(line_number, "frames", "missing or not an array");
    }
    seq.id = j.value("id", "");
    seq.text = j.value("text", "");
    if (j.contains("fps")) {
        if (!j["fps"].is_number()) record_error(line_number, "fps", "expected a number");
        seq.fps = j["fps"].get<double>();
    }
    int joints = -1;
    int frame_idx = 0;
    for (const auto& frame_json : j["frames"]) {
        if (!frame_json.is_array()) {
            record_error(line_number, "frames[" + std::to_string(frame_idx) + "]", "expected an array");
        }
        PoseFrame frame;
        int joint_idx = 0;
        for (const auto& kp : frame_json) {
            const std::string field =
                "frames[" + std::to_string(frame_idx) + "][" + std::to_string(joint_idx) + "]";
            if (!kp.is_array() || kp.size() != 3 || !kp[0].is_number() || !kp[1].is_number() ||
                !kp[2].is_number()) {
                record_error(line_number, field, "expected [x, y, confidence]");
            }
            Keypoint k{kp[0].get<double>(), kp[1].get<double>(), kp[2].get<double>()};
            if (!std::isfinite(k.x) || !std::isfinite(k.y)) {
                record_error(line_number, field, "coordinates must be finite");
            }
            if (!(k.confidence >= 0.0 && k.confidence <= 1.0)) {
                record_error(line_number, field,
                             "confidence " + std::to_string(k.confidence) + " outside [0, 1]");
            }
            frame.keypoints.push_back(k);
            ++joint_idx;
        }
        if (frame.keypoints.empty()) {
            record_error(line_number, "frames[" + std::to_string(frame_idx) + "]", "empty frame");
        }
        if (joints < 0) {
            joints = frame.joint_count();
        } else if (frame.joint_count() != joints) {
            record_error(line_number, "frames[" + std::to_string(frame_idx) + "]",
                         "joint count " + std::to_string(frame.joint_count()) +
                             " differs from first frame's " + std::to_string(joints));
        }
        seq.frames.push_back(std::move(frame));
        ++frame_idx;
    }
    if (seq.frames.empty()) record_error(line_number, "frames", "sequence must have at least one frame");
    return seq;
}

std::string sequence_to_json_line(const PoseSequence& seq) {
    json frames = json::array();
    for (const PoseFrame& frame : seq.frames) {
        json fj = json::array();
        for (const Keypoint& k : frame.keypoints) {
            fj.push_back(json::array({k.x, k.y, k.confidence}));
        }
        frames.push_back(std::move(fj));
    }
    json j{{"id", seq.id}, {"text", seq.text}, {"fps", seq.fps}, {"frames", std::move(frames)}};
    return j.dump();
}

std::vector<PoseSequence> load_sequences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pose file: " + path);
    std::vector<PoseSequence> out;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(sequence_from_json_line(line, line_number));
    }
    return out;
}

void save_sequences(const std::string& path, const std::vector<PoseSequence>& seqs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write pose file: " + path);
    for (const PoseSequence& seq : seqs) out << sequence_to_json_line(seq) << "\n";
}

// ---- tensor bridges ------------------------------------------------------

Tensor coords_tensor(const PoseFrame& frame) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(frame.joint_count()) * 2);
    for (const Keypoint& k : frame.keypoints) {
        data.push_back(k.x);
        data.push_back(k.y);
    }
    return Tensor({frame.joint_count(), 2}, std::move(data));
}

Tensor triples_tensor(const PoseFrame& frame) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(frame.joint_count()) * 3);
    for (const Keypoint& k : frame.keypoints) {
        data.push_back(k.x);
        data.push_back(k.y);
        data.push_back(k.confidence);
    }
    return Tensor({frame.joint_count(), 3}, std::move(data));
}

std::vector<double> confidences(const PoseFrame& frame) {
    std::vector<double> out;
    out.reserve(frame.keypoints.size());
    for (const Keypoint& k : frame.keypoints) out.push_back(k.confidence);
    return out;
}

PoseFrame frame_from_parts(const Tensor& coords, const std::vector<double>& confidence) {
    if (coords.rank() != 2 || coords.extent(1) != 2) {
        throw ShapeError("frame_from_parts: coords must be [J, 2], got " + shape_str(coords.shape()));
    }
    if (static_cast<std::size_t>(coords.extent(0)) != confidence.size()) {
        throw ShapeError("frame_from_parts: confidence length " + std::to_string(confidence.size()) +
                         " does not match J = " + std::to_string(coords.extent(0)));
    }
    PoseFrame frame;
    const int j = coords.extent(0);
    frame.keypoints.reserve(static_cast<std::size_t>(j));
    for (int i = 0; i < j; ++i) {
        frame.keypoints.push_back(Keypoint{coords.at(i, 0), coords.at(i, 1),
                                           std::clamp(confidence[static_cast<std::size_t>(i)], 0.0, 1.0)});
    }
    return frame;
}

double mean_confidence(const PoseFrame& frame) {
    if (frame.keypoints.empty()) throw ValueError("mean_confidence: empty frame");
    double sum = 0.0;
    for (const Keypoint& k : frame.keypoints) sum += k.confidence;
    return sum / static_cast<double>(frame.keypoints.size());
}

}  // namespace signflow
