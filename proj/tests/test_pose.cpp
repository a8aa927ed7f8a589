#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "signflow/error.hpp"
#include "signflow/pose.hpp"
#include "signflow/rng.hpp"

using namespace signflow;

namespace {

PoseFrame random_frame(int joints, RngStream& rng) {
    PoseFrame f;
    f.keypoints.reserve(static_cast<std::size_t>(joints));
    for (int i = 0; i < joints; ++i) {
        f.keypoints.push_back(Keypoint{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 1)});
    }
    return f;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("pose");

TEST_CASE("default skeleton partition sizes") {
    Skeleton s = Skeleton::desk_default();
    CHECK(s.joints == 54);
    CHECK(s.group_count() == 3);
    CHECK(s.group_indices("face").size() == 12);
    CHECK(s.group_indices("body").size() == 8);
    CHECK(s.group_indices("hands").size() == 34);

    RngStream rng = RngStream::derive(1, "pose-split");
    PoseFrame f = random_frame(54, rng);
    auto parts = split_articulators(f, s);
    CHECK(parts.at("face").size() == 12);
    CHECK(parts.at("body").size() == 8);
    CHECK(parts.at("hands").size() == 34);
}

TEST_CASE("regrouped skeletons") {
    Skeleton s = Skeleton::desk_default();
    CHECK(s.regrouped(1).group_count() == 1);
    CHECK(s.regrouped(1).group_indices("pose").size() == 54);
    CHECK(s.regrouped(4).group_count() == 4);
    CHECK(s.regrouped(4).group_indices("left_hand").size() == 17);
    CHECK(s.regrouped(4).group_indices("right_hand").size() == 17);
    CHECK_THROWS_AS(s.regrouped(2), ValueError);
}

TEST_CASE("split rejects frame/skeleton mismatch") {
    Skeleton s = Skeleton::desk_default();
    RngStream rng = RngStream::derive(2, "pose-mismatch");
    PoseFrame f = random_frame(10, rng);
    CHECK_THROWS_AS(split_articulators(f, s), ShapeError);
}

TEST_CASE("split/merge round-trip is bit-exact") {
    Skeleton s = Skeleton::desk_default();
    RngStream rng = RngStream::derive(3, "pose-roundtrip");
    for (int trial = 0; trial < 50; ++trial) {
        PoseFrame f = random_frame(54, rng);
        PoseFrame back = merge_articulators(split_articulators(f, s), s);
        REQUIRE(back.joint_count() == f.joint_count());
        for (int i = 0; i < 54; ++i) {
            CHECK(back.keypoints[i].x == f.keypoints[i].x);
            CHECK(back.keypoints[i].y == f.keypoints[i].y);
            CHECK(back.keypoints[i].confidence == f.keypoints[i].confidence);
        }
    }
}

TEST_CASE("merge contract violations") {
    Skeleton s = Skeleton::desk_default();
    RngStream rng = RngStream::derive(4, "pose-merge");
    PoseFrame f = random_frame(54, rng);
    auto parts = split_articulators(f, s);

    auto missing = parts;
    missing.erase("hands");
    CHECK_THROWS_AS(merge_articulators(missing, s), ValueError);

    auto wrong_len = parts;
    wrong_len["face"].pop_back();
    CHECK_THROWS_AS(merge_articulators(wrong_len, s), ValueError);

    Skeleton overlapping = s;
    overlapping.groups[1].second[0] = 0;  // joint 0 now in face and body
    CHECK_THROWS_AS(merge_articulators(parts, overlapping), ValueError);
}

TEST_CASE("bone vectors") {
    Skeleton s;
    s.joints = 3;
    s.bones = {{0, 1}, {0, 2}, {1, 1}};
    s.groups = {{"pose", {0, 1, 2}}};
    PoseFrame f;
    f.keypoints = {{0, 0, 1}, {1, 0, 1}, {3, 4, 1}};

    auto bv = bone_vectors(f, s);
    REQUIRE(bv.size() == 3);
    CHECK(bv[0].dx == doctest::Approx(1.0));
    CHECK(bv[0].dy == doctest::Approx(0.0));
    CHECK(bv[0].length == doctest::Approx(1.0));
    CHECK_FALSE(bv[0].degenerate);

    CHECK(bv[1].dx == doctest::Approx(0.6));
    CHECK(bv[1].dy == doctest::Approx(0.8));
    CHECK(bv[1].length == doctest::Approx(5.0));

    CHECK(bv[2].degenerate);
    CHECK(bv[2].dx == 0.0);
    CHECK(bv[2].dy == 0.0);
}

TEST_CASE("bone directions have unit norm unless degenerate") {
    Skeleton s = Skeleton::desk_default();
    RngStream rng = RngStream::derive(5, "pose-bones");
    for (int trial = 0; trial < 20; ++trial) {
        PoseFrame f = random_frame(54, rng);
        for (const BoneVector& bv : bone_vectors(f, s)) {
            if (bv.degenerate) continue;
            CHECK(std::hypot(bv.dx, bv.dy) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("serialization round-trip preserves every bit") {
    RngStream rng = RngStream::derive(6, "pose-io");
    std::vector<PoseSequence> seqs;
    for (int i = 0; i < 5; ++i) {
        PoseSequence seq;
        seq.id = "seq-" + std::to_string(i);
        seq.text = "hello world " + std::to_string(i);
        seq.fps = 12.5;
        const int t = 1 + static_cast<int>(rng.index(6));
        for (int j = 0; j < t; ++j) seq.frames.push_back(random_frame(7, rng));
        seqs.push_back(std::move(seq));
    }
    // Awkward but representable values.
    seqs[0].frames[0].keypoints[0] = Keypoint{0.1 + 0.2, -1.0 / 3.0, 1.0 / 7.0};

    const std::string path = temp_path("signflow_pose_io.jsonl");
    save_sequences(path, seqs);
    auto loaded = load_sequences(path);
    REQUIRE(loaded.size() == seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        CHECK(loaded[i].id == seqs[i].id);
        CHECK(loaded[i].text == seqs[i].text);
        CHECK(loaded[i].fps == seqs[i].fps);
        REQUIRE(loaded[i].length() == seqs[i].length());
        for (int t = 0; t < seqs[i].length(); ++t) {
            for (int j = 0; j < seqs[i].frames[t].joint_count(); ++j) {
                CHECK(loaded[i].frames[t].keypoints[j].x == seqs[i].frames[t].keypoints[j].x);
                CHECK(loaded[i].frames[t].keypoints[j].y == seqs[i].frames[t].keypoints[j].y);
                CHECK(loaded[i].frames[t].keypoints[j].confidence ==
                      seqs[i].frames[t].keypoints[j].confidence);
            }
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("loader rejects out-of-range confidence with line and field") {
    const std::string path = temp_path("signflow_pose_bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"a","text":"x","fps":25,"frames":[[[0,0,1]]]})" << "\n";
        out << R"({"id":"b","text":"y","fps":25,"frames":[[[0,0,1.3]]]})" << "\n";
    }
    try {
        load_sequences(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("frames[0][0]") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("loader reports malformed JSON with line number") {
    const std::string path = temp_path("signflow_pose_malformed.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"a","text":"x","fps":25,"frames":[[[0,0,1]]]})" << "\n";
        out << "{not json\n";
    }
    try {
        load_sequences(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("empty file yields empty list") {
    const std::string path = temp_path("signflow_pose_empty.jsonl");
    std::ofstream(path).close();
    CHECK(load_sequences(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("tensor bridges") {
    PoseFrame f;
    f.keypoints = {{0.5, -0.25, 0.9}, {0.1, 0.2, 0.4}};
    Tensor c = coords_tensor(f);
    CHECK(c.shape() == Shape{2, 2});
    CHECK(c.at(1, 0) == 0.1);
    Tensor t = triples_tensor(f);
    CHECK(t.shape() == Shape{2, 3});
    CHECK(t.at(0, 2) == 0.9);
    CHECK(mean_confidence(f) == doctest::Approx(0.65));

    PoseFrame back = frame_from_parts(c, confidences(f));
    CHECK(back.keypoints[0].x == f.keypoints[0].x);
    CHECK(back.keypoints[1].confidence == f.keypoints[1].confidence);
}

TEST_SUITE_END();
