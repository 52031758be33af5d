#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ghmcw/data.hpp"
#include "ghmcw/errors.hpp"

using ghmcw::Group;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ghmcw_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ghmcw::LabeledDataset balanced(std::size_t per_class, std::size_t classes, std::uint64_t seed) {
    ghmcw::DatasetSpec spec;
    spec.class_count = classes;
    spec.max_class_size = per_class;
    spec.imbalance_factor = 1.0;
    spec.seed = seed;
    return ghmcw::synth_gaussian(spec, ghmcw::circle_means(classes, 2));
}

}  // namespace

TEST_CASE("longtailed_sizes") {
    CHECK(ghmcw::longtailed_sizes(2, 1000, 100.0) == std::vector<std::size_t>{1000, 10});
    CHECK(ghmcw::longtailed_sizes(5, 321, 1.0) == std::vector<std::size_t>(5, 321));
    CHECK(ghmcw::longtailed_sizes(10, 5000, 100.0) ==
          std::vector<std::size_t>{5000, 2997, 1797, 1077, 646, 387, 232, 139, 83, 50});
    CHECK(ghmcw::longtailed_sizes(3, 10, 1e6).back() == 1);

    CHECK_THROWS_AS(ghmcw::longtailed_sizes(1, 10, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::longtailed_sizes(3, 0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::longtailed_sizes(3, 10, 0.5), std::invalid_argument);
}

TEST_CASE("longtailed_sizes head/tail ratio and monotonicity") {
    for (double imbalance : {10.0, 100.0, 500.0}) {
        const auto sizes = ghmcw::longtailed_sizes(10, 5000, imbalance);
        const double ratio = static_cast<double>(sizes.front()) / static_cast<double>(sizes.back());
        CHECK(std::abs(ratio - imbalance) <= 0.05 * imbalance);
        for (std::size_t c = 1; c < sizes.size(); ++c) CHECK(sizes[c] <= sizes[c - 1]);
    }
    for (std::size_t classes = 2; classes < 30; ++classes) {
        const auto sizes = ghmcw::longtailed_sizes(classes, 777, 37.0);
        for (std::size_t c = 1; c < sizes.size(); ++c) CHECK(sizes[c] <= sizes[c - 1]);
        for (std::size_t n : sizes) CHECK(n >= 1);
    }
}

TEST_CASE("assign_groups") {
    const std::vector<std::size_t> eight{80, 70, 60, 50, 40, 30, 20, 10};
    const auto g8 = ghmcw::assign_groups(eight);
    CHECK(g8 == std::vector<Group>{Group::many, Group::many, Group::medium, Group::medium, Group::few,
                                   Group::few, Group::rare, Group::rare});

    const std::vector<std::size_t> two{1000, 10};
    CHECK(ghmcw::assign_groups(two) == std::vector<Group>{Group::many, Group::rare});
    const std::vector<std::size_t> swapped{10, 1000};
    CHECK(ghmcw::assign_groups(swapped) == std::vector<Group>{Group::rare, Group::many});

    const std::vector<std::size_t> equal(8, 5);
    CHECK(ghmcw::assign_groups(equal) == g8);

    const std::vector<std::size_t> three{30, 20, 10};
    CHECK(ghmcw::assign_groups(three) == std::vector<Group>{Group::many, Group::few, Group::rare});
}

TEST_CASE("assign_groups is a rank-ordered partition") {
    for (std::size_t classes = 2; classes < 40; ++classes) {
        const auto sizes = ghmcw::longtailed_sizes(classes, 1000, 50.0);
        const auto groups = ghmcw::assign_groups(sizes);
        REQUIRE(groups.size() == classes);
        CHECK(groups.front() == Group::many);
        CHECK(groups.back() == Group::rare);
        for (std::size_t c = 1; c < classes; ++c) CHECK(groups[c] >= groups[c - 1]);
        if (classes >= 4) {
            std::set<Group> seen(groups.begin(), groups.end());
            CHECK(seen.size() == 4);
        }
    }
    CHECK(ghmcw::group_name(Group::medium) == "Medium");
}

TEST_CASE("circle_means") {
    const auto two = ghmcw::circle_means(2, 2);
    CHECK(two[0][0] == -2.0);
    CHECK(two[0][1] == doctest::Approx(0.0).scale(1.0));
    CHECK(two[1][0] == doctest::Approx(2.0));
    CHECK(two[1][1] == doctest::Approx(0.0).scale(1.0));
    const auto five = ghmcw::circle_means(5, 3, 4.0);
    for (const auto& m : five) {
        CHECK(std::hypot(m[0], m[1]) == doctest::Approx(4.0));
        CHECK(m[2] == 0.0);
    }
}

TEST_CASE("synth_gaussian") {
    ghmcw::DatasetSpec spec;
    spec.class_count = 2;
    spec.max_class_size = 1000;
    spec.imbalance_factor = 100.0;
    spec.seed = 42;
    const std::vector<std::vector<double>> means{{-2.0, 0.0}, {2.0, 0.0}};

    const auto a = ghmcw::synth_gaussian(spec, means);
    const auto b = ghmcw::synth_gaussian(spec, means);
    CHECK(a == b);
    CHECK(a.class_sizes()[0] == 1000);
    CHECK(a.class_sizes()[1] == 10);
    CHECK(a.groups()[0] == Group::many);
    CHECK(a.groups()[1] == Group::rare);

    spec.seed = 43;
    CHECK(!(ghmcw::synth_gaussian(spec, means) == a));

    SUBCASE("empirical means within 3 sigma / sqrt(n)") {
        for (std::size_t c = 0; c < 2; ++c) {
            double sx = 0.0, sy = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a.label(i) != c) continue;
                sx += a.row(i)[0];
                sy += a.row(i)[1];
                ++n;
            }
            const double bound = 3.0 / std::sqrt(static_cast<double>(n));
            CHECK(std::abs(sx / static_cast<double>(n) - means[c][0]) < bound);
            CHECK(std::abs(sy / static_cast<double>(n) - means[c][1]) < bound);
        }
    }

    SUBCASE("balanced spec gives equal counts") {
        const auto ds = balanced(300, 4, 1);
        for (std::size_t n : ds.class_sizes()) CHECK(n == 300);
    }

    SUBCASE("covariances are honoured") {
        spec.imbalance_factor = 1.0;
        spec.max_class_size = 20000;
        const std::vector<std::vector<double>> covs{{4.0, 0.0, 0.0, 0.25}, {1.0, 0.5, 0.5, 1.0}};
        const auto ds = ghmcw::synth_gaussian(spec, means, covs);
        double sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.label(i) != 0) continue;
            sxx += std::pow(ds.row(i)[0] + 2.0, 2);
            syy += std::pow(ds.row(i)[1], 2);
        }
        CHECK(sxx / 20000.0 == doctest::Approx(4.0).epsilon(0.05));
        CHECK(syy / 20000.0 == doctest::Approx(0.25).epsilon(0.05));
    }

    SUBCASE("invalid covariances") {
        const std::vector<std::vector<double>> not_pd{{1.0, 2.0, 2.0, 1.0}, {1.0, 0.0, 0.0, 1.0}};
        CHECK_THROWS_AS(ghmcw::synth_gaussian(spec, means, not_pd), std::invalid_argument);
        const std::vector<std::vector<double>> asym{{1.0, 0.3, 0.0, 1.0}, {1.0, 0.0, 0.0, 1.0}};
        CHECK_THROWS_AS(ghmcw::synth_gaussian(spec, means, asym), std::invalid_argument);
        const std::vector<std::vector<double>> one_mean{{0.0, 0.0}};
        CHECK_THROWS_AS(ghmcw::synth_gaussian(spec, one_mean), std::invalid_argument);
    }
}

TEST_CASE("subsample_longtailed") {
    const auto source = balanced(1000, 2, 3);
    const auto sub = ghmcw::subsample_longtailed(source, 100.0, 9);
    CHECK(sub.class_sizes()[0] == 1000);
    CHECK(sub.class_sizes()[1] == 10);
    CHECK(ghmcw::subsample_longtailed(source, 100.0, 9) == sub);
    CHECK(!(ghmcw::subsample_longtailed(source, 100.0, 10) == sub));

    const auto same = ghmcw::subsample_longtailed(source, 1.0, 9);
    CHECK(same == source);

    // retained rows are rows of the source
    std::set<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < source.size(); ++i) rows.insert({source.row(i)[0], source.row(i)[1]});
    for (std::size_t i = 0; i < sub.size(); ++i) CHECK(rows.count({sub.row(i)[0], sub.row(i)[1]}) == 1);

    const std::vector<double> features(6 * 2, 0.0);
    const ghmcw::LabeledDataset lopsided(2, 3, features, {0, 0, 0, 0, 1, 2});
    CHECK_NOTHROW(ghmcw::subsample_longtailed(lopsided, 16.0, 1));
    CHECK_THROWS_AS(ghmcw::subsample_longtailed(lopsided, 1.0, 1), std::invalid_argument);
}

TEST_CASE("LabeledDataset validation") {
    CHECK_THROWS_AS(ghmcw::LabeledDataset(2, 2, {0.0, 1.0, 2.0}, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::LabeledDataset(1, 2, {0.0, 1.0}, {0, 2}), std::invalid_argument);
    const ghmcw::LabeledDataset ds(1, 3, {0.0, 1.0, 2.0}, {2, 2, 0});
    CHECK(ds.class_sizes()[0] == 1);
    CHECK(ds.class_sizes()[1] == 0);
    CHECK(ds.class_sizes()[2] == 2);
}

TEST_CASE("CSV round-trip is exact") {
    const auto dir = scratch_dir("csv");
    ghmcw::DatasetSpec spec;
    spec.class_count = 5;
    spec.max_class_size = 200;
    spec.imbalance_factor = 20.0;
    spec.feature_dim = 3;
    spec.seed = 5;
    const auto ds = ghmcw::synth_gaussian(spec, ghmcw::circle_means(5, 3));
    ghmcw::write_csv(dir / "d.csv", ds);
    const auto back = ghmcw::read_csv(dir / "d.csv", 5);
    CHECK(back == ds);

    std::ifstream in(dir / "d.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "f0,f1,f2,label");
}

TEST_CASE("CSV errors") {
    const auto dir = scratch_dir("csv_errors");
    CHECK_THROWS_AS(ghmcw::read_csv(dir / "missing.csv"), ghmcw::IoError);
    try {
        ghmcw::read_csv(dir / "missing.csv");
    } catch (const ghmcw::IoError& e) {
        CHECK(std::string(e.what()).find("missing.csv") != std::string::npos);
    }

    const auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return dir / name;
    };
    CHECK_THROWS_AS(ghmcw::read_csv(write("a.csv", "")), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::read_csv(write("b.csv", "x,y,label\n1,2,0\n")), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::read_csv(write("c.csv", "f0,label\n1,2,0\n")), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::read_csv(write("d.csv", "f0,label\nabc,0\n")), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::read_csv(write("e.csv", "f0,label\n1.5,-1\n")), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::read_csv(write("f.csv", "f0,label\n")), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::read_csv(write("g.csv", "f0,label\n1,3\n"), 2), std::invalid_argument);
    const auto ok = ghmcw::read_csv(write("h.csv", "f0,label\r\n1.5,1\r\n-2,0\r\n"));
    CHECK(ok.size() == 2);
    CHECK(ok.class_count() == 2);
}

TEST_CASE("sizes_record and spec json") {
    const ghmcw::LabeledDataset ds(1, 2, {0.0, 1.0, 2.0}, {0, 0, 1});
    const auto rec = ghmcw::sizes_record(ds);
    CHECK(rec.at("class_sizes") == nlohmann::json::array({2, 1}));
    CHECK(rec.at("groups") == nlohmann::json::array({"Many", "Rare"}));

    ghmcw::DatasetSpec spec;
    spec.class_count = 7;
    spec.seed = 99;
    const nlohmann::json j = spec;
    const auto back = j.get<ghmcw::DatasetSpec>();
    CHECK(back.class_count == 7);
    CHECK(back.seed == 99);
}
