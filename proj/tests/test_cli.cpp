#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cli.hpp"
#include "helpers.hpp"
#include "labrbf/model_io.hpp"

#include <sstream>

using testing::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "labkrr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = labkrr::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const std::vector<std::string> kFastTrain{"--n0", "5", "--k", "5", "--max-sv", "20", "--inner-iters",
                                          "10", "--outer-iters", "5", "--batch-size", "16",
                                          "--sigma0", "3", "--lambda", "1e-3", "--eta", "1e-3"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

}  // namespace

TEST_CASE("synth specs") {
    const auto s = labkrr::parse_synth_spec("cherkassky:id=2,n=200,noise=0.1");
    CHECK(s.kind == labkrr::SynthSpec::Kind::Cherkassky);
    CHECK(s.id == 2);
    CHECK(s.n == 200);
    CHECK(s.noise == 0.1);
    const auto d = labkrr::parse_synth_spec("sin2x3");
    CHECK(d.kind == labkrr::SynthSpec::Kind::Sin2x3);
    CHECK_THROWS_AS((void)labkrr::parse_synth_spec("cherkassky:id=4"), labkrr::UsageError);
    CHECK_THROWS_AS((void)labkrr::parse_synth_spec("cherkassky:n=10"), labkrr::UsageError);
    CHECK_THROWS_AS((void)labkrr::parse_synth_spec("sin2x3:n=ten"), labkrr::UsageError);
    CHECK_THROWS_AS((void)labkrr::parse_synth_spec("spiral"), labkrr::UsageError);
}

TEST_CASE("synth writes data and a ground-truth grid") {
    TempDir dir("cli");
    auto r = run({"synth", "--spec", "sin2x3:n=50", "--seed", "1", "--out", dir.file("s.csv"), "--grid",
                  dir.file("g.csv")});
    CHECK(r.code == 0);
    CHECK(lines(testing::read_text(dir.file("s.csv"))) == 51);
    CHECK(lines(testing::read_text(dir.file("g.csv"))) == 1001);

    r = run({"synth", "--spec", "cherkassky:id=2,n=200,noise=0.1", "--out", dir.file("f2.csv")});
    CHECK(r.code == 0);
    const auto raw = labrbf::data::load_csv(dir.file("f2.csv"), std::string("y"), false);
    CHECK(raw.size() == 200);
    CHECK(raw.dims() == 6);

    r = run({"synth", "--spec", "cherkassky:id=4", "--out", dir.file("bad.csv")});
    CHECK(r.code == 2);
}

TEST_CASE("train and predict round trip") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--spec", "cherkassky:id=1,n=80,noise=0.05", "--seed", "3", "--out",
                 dir.file("d.csv")}).code == 0);
    const auto t = run(with({"train", "--data", dir.file("d.csv"), "--seed", "4", "--out", dir.file("m.json")},
                            kFastTrain));
    REQUIRE(t.code == 0);
    CHECK(t.out.find("support") != std::string::npos);
    CHECK(std::filesystem::exists(dir.file("m.json.trace.csv")));

    const auto p = run({"predict", "--model", dir.file("m.json"), "--data", dir.file("d.csv"), "--out",
                        dir.file("p.csv")});
    REQUIRE(p.code == 0);
    const auto text = testing::read_text(dir.file("p.csv"));
    CHECK(text.rfind("prediction_normalized,prediction", 0) == 0);
    CHECK(lines(text) == 81);

    // the CSV predictions agree with the in-process model
    const auto model = labrbf::io::load_model(dir.file("m.json"));
    const auto raw = labrbf::data::load_csv(dir.file("d.csv"), std::string("y"), false);
    const labrbf::Vector expect = model.predict_raw(raw.features);
    const auto preds = labrbf::data::load_csv(dir.file("p.csv"), std::string("prediction"), false);
    CHECK((preds.targets - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("a fixed seed gives byte-identical models") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--spec", "sin2x3:n=100,noise=0.2", "--out", dir.file("d.csv")}).code == 0);
    for (const char* name : {"a.json", "b.json"})
        REQUIRE(run(with({"train", "--data", dir.file("d.csv"), "--seed", "9", "--out", dir.file(name)},
                         kFastTrain)).code == 0);
    CHECK(testing::read_text(dir.file("a.json")) == testing::read_text(dir.file("b.json")));
}

TEST_CASE("predicting at the support points with a tiny ridge reproduces their targets") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--spec", "cherkassky:id=1,n=60", "--out", dir.file("d.csv")}).code == 0);
    REQUIRE(run({"train", "--data", dir.file("d.csv"), "--n0", "10", "--max-sv", "10", "--outer-iters",
                 "0", "--sigma0", "2", "--lambda", "1e-10", "--out", dir.file("m.json")}).code == 0);
    const auto model = labrbf::io::load_model(dir.file("m.json"));
    CHECK((model.predict(model.support_x) - model.support_y).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("usage and IO errors exit with 2") {
    TempDir dir("cli");
    auto r = run({"train", "--data", "/no/such/file.csv"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/no/such/file.csv") != std::string::npos);

    REQUIRE(run({"synth", "--spec", "cherkassky:id=1,n=60", "--out", dir.file("d.csv")}).code == 0);
    REQUIRE(run(with({"train", "--data", dir.file("d.csv"), "--out", dir.file("m.json")}, kFastTrain)).code == 0);

    testing::write_text(dir.file("wide.csv"), "a,b,c,d\n1,2,3,4\n");
    CHECK(run({"predict", "--model", dir.file("m.json"), "--data", dir.file("wide.csv"), "--out",
               dir.file("p.csv")}).code == 2);
    testing::write_text(dir.file("empty.csv"), "");
    CHECK(run({"predict", "--model", dir.file("m.json"), "--data", dir.file("empty.csv"), "--out",
               dir.file("p.csv")}).code == 2);
    CHECK(run({"train", "--data", dir.file("d.csv"), "--frobnicate", "1"}).code == 2);
    CHECK(run({"train", "--data", dir.file("d.csv"), "--n0", "500"}).code == 2);
    CHECK(run({"benchmark", "--synth", "sin2x3:n=40", "--methods", "rbf_krr", "--repeats", "1", "--out",
               "/no/such/dir/r.json"}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("config file precedence") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--spec", "cherkassky:id=1,n=60", "--out", dir.file("d.csv")}).code == 0);
    testing::write_text(dir.file("c.cfg"), "max-sv = 12\nn0 = 4\nk = 4\nsigma0 = 2\nouter-iters = 10\ninner-iters = 2\nepsilon = 0\n");
    REQUIRE(run({"train", "--data", dir.file("d.csv"), "--config", dir.file("c.cfg"), "--out",
                 dir.file("a.json")}).code == 0);
    CHECK(labrbf::io::load_model(dir.file("a.json")).support_size() == 12);
    REQUIRE(run({"train", "--data", dir.file("d.csv"), "--config", dir.file("c.cfg"), "--max-sv", "8",
                 "--out", dir.file("b.json")}).code == 0);
    CHECK(labrbf::io::load_model(dir.file("b.json")).support_size() == 8);
    testing::write_text(dir.file("bad.cfg"), "colour = blue\n");
    CHECK(run({"train", "--data", dir.file("d.csv"), "--config", dir.file("bad.cfg")}).code == 2);
}

TEST_CASE("verify and gradcheck") {
    auto r = run({"verify", "--seed", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("woodbury") != std::string::npos);

    r = run({"verify", "--shared"});
    CHECK(r.code == 0);
    CHECK(r.out.find("shared_map") != std::string::npos);

    r = run({"verify", "--max-n", "2", "--max-f", "4", "--lambda", "1e-14"});
    CHECK((r.code == 0 || r.code == 1));  // near-singular sizes report rather than crash

    r = run({"gradcheck", "--seed", "3", "--probes", "50"});
    CHECK(r.code == 0);
    CHECK(r.out.find("zero-residual") != std::string::npos);
    CHECK(run({"gradcheck", "--probes", "0"}).code == 2);
}

TEST_CASE("benchmark and sweep outputs") {
    TempDir dir("cli");
    auto r = run(with({"benchmark", "--synth", "sin2x3:n=150,noise=0.1", "--methods", "lab,rbf_krr,tl1_krr",
                       "--repeats", "2", "--out", dir.file("r.json"), "--rows", dir.file("rows.csv")},
                      kFastTrain));
    CHECK(r.code == 0);
    CHECK(r.out.find("rbf_krr") != std::string::npos);
    const auto j = nlohmann::json::parse(testing::read_text(dir.file("r.json")));
    CHECK(j.at("reports").size() == 3);
    CHECK(lines(testing::read_text(dir.file("rows.csv"))) == 7);

    r = run(with({"sweep", "--synth", "cherkassky:id=2,n=100,noise=0.1", "--param", "ratio", "--values",
                  "0.2,0.5", "--repeats", "1", "--out", dir.file("s.csv")},
                 kFastTrain));
    CHECK(r.code == 0);
    CHECK(lines(testing::read_text(dir.file("s.csv"))) == 3);
    CHECK(run({"sweep", "--synth", "sin2x3", "--param", "gamma", "--values", "1", "--out",
               dir.file("x.csv")}).code == 2);
}
