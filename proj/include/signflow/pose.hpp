#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "signflow/tensor.hpp"

namespace signflow {

// 2D keypoint with an estimator confidence. Coordinates are normalized image
// coordinates, nominally in [-1, 1]; confidence is always in [0, 1].
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 1.0;
};

struct PoseFrame {
    std::vector<Keypoint> keypoints;

    int joint_count() const { return static_cast<int>(keypoints.size()); }
};

struct PoseSequence {
    std::string id;
    std::string text;
    double fps = 25.0;
    std::vector<PoseFrame> frames;

    int length() const { return static_cast<int>(frames.size()); }
};

// Joint topology: bone edges plus a named partition of joints into
// articulators. The default partition is face / body / hands; 1- and
// 4-group variants support the expert-count ablation.
struct Skeleton {
    int joints = 0;
    std::vector<std::pair<int, int>> bones;  // (parent, child)
    std::vector<std::pair<std::string, std::vector<int>>> groups;  // ordered partition

    void validate() const;  // throws ValueError on a malformed skeleton
    int group_count() const { return static_cast<int>(groups.size()); }
    const std::vector<int>& group_indices(const std::string& name) const;

    // 54-joint desk-scale skeleton: 12 face, 8 body, 17 per hand.
    static Skeleton desk_default();
    // Same joints/bones, regrouped for 1, 3, or 4 experts.
    Skeleton regrouped(int expert_count) const;
};

std::map<std::string, std::vector<Keypoint>> split_articulators(const PoseFrame& frame,
                                                                const Skeleton& skeleton);
PoseFrame merge_articulators(const std::map<std::string, std::vector<Keypoint>>& parts,
                             const Skeleton& skeleton);

struct BoneVector {
    double dx = 0.0;
    double dy = 0.0;
    double length = 0.0;
    bool degenerate = false;  // parent == child; direction reported as (0, 0)
};

std::vector<BoneVector> bone_vectors(const PoseFrame& frame, const Skeleton& skeleton);

// JSON-lines pose file format, one sequence per line:
//   {"id": str, "text": str, "fps": number, "frames": [[[x, y, c], ...J], ...T]}
// Doubles round-trip bit-exactly. Malformed records raise DataError naming
// the line and field.
std::vector<PoseSequence> load_sequences(const std::string& path);
void save_sequences(const std::string& path, const std::vector<PoseSequence>& seqs);
std::string sequence_to_json_line(const PoseSequence& seq);
PoseSequence sequence_from_json_line(const std::string& line, int line_number = 1);

// Tensor bridges used by the model and losses.
Tensor coords_tensor(const PoseFrame& frame);            // [J, 2]
Tensor triples_tensor(const PoseFrame& frame);           // [J, 3] as (x, y, confidence)
std::vector<double> confidences(const PoseFrame& frame); // length J
PoseFrame frame_from_parts(const Tensor& coords, const std::vector<double>& confidence);
double mean_confidence(const PoseFrame& frame);

}  // namespace signflow
