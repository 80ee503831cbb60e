#include <gtest/gtest.h>

#include "megart/dsl.hpp"
#include "support.hpp"

using namespace megart;
using namespace support;

TEST(Signature, AnalysisLoopHasOneEntryTwoExits) {
  Signature s = signature_of(fixture_fld("fld/self-repair-a.fld"));
  EXPECT_EQ(s.entry_states, (std::set<std::string>{"Start"}));
  EXPECT_EQ(s.exit_states, (std::set<std::string>{"OK", "Failures"}));
  EXPECT_TRUE(s.single_entry);
  EXPECT_FALSE(s.single_exit);
}

TEST(Signature, SelfOptimizationHasTwoEntries) {
  Signature s = signature_of(fixture_fld("fld/self-optimization.fld"));
  EXPECT_EQ(s.entry_states, (std::set<std::string>{"Monitor", "Analyze"}));
  EXPECT_EQ(s.exit_states, (std::set<std::string>{"Analyzed", "Executed"}));
  EXPECT_FALSE(s.single_entry);
}

TEST(Signature, SingletonFlags) {
  Parsed<Megamodel> m = parse_fld(R"(megamodel "One" {
    initial Start
    final Done
    operation Work { exits { ok } }
    flow Start -> Work
    flow Work.ok -> Done
  })");
  ASSERT_TRUE(m);
  Signature s = signature_of(*m);
  EXPECT_TRUE(s.single_entry);
  EXPECT_TRUE(s.single_exit);
}

TEST(MapeLabel, FixtureLabels) {
  EXPECT_EQ(mape_label(fixture_fld("fld/self-repair-monolithic.fld")), "MAPE");
  EXPECT_EQ(mape_label(fixture_fld("fld/self-repair.fld")), "M..PE");
  EXPECT_EQ(mape_label(fixture_fld("fld/self-repair-a.fld")), "A");
  EXPECT_EQ(mape_label(fixture_fld("fld/self-management-1.fld")), "");
}

TEST(CheckMegamodel, FixturesAreClean) {
  for (const std::string& f : corpus_files("fld", ".fld")) {
    Megamodel m = fixture_fld(f);
    EXPECT_TRUE(check_megamodel(m).empty()) << f;
  }
}

TEST(CheckMegamodel, OperationWithoutExits) {
  Megamodel m = fixture_fld("fld/self-repair-monolithic.fld");
  m.find_operation("Effect")->exits.clear();
  EXPECT_TRUE(has_code(check_megamodel(m), "E-OP-EXITS"));
}

TEST(CheckMegamodel, DestructionStateMustBeFinal) {
  Megamodel m = fixture_fld("fld/update-adaptable-software.fld");
  for (ControlState& s : m.states)
    if (s.destruction) s.final = false;
  EXPECT_TRUE(has_code(check_megamodel(m), "E-STATE-DESTR"));
}

TEST(CheckMegamodel, StateBothInitialAndFinal) {
  Megamodel m = fixture_fld("fld/self-repair-monolithic.fld");
  m.states.front().final = true;
  EXPECT_TRUE(has_code(check_megamodel(m), "E-STATE-KIND"));
}

TEST(CheckMegamodel, DiagnosticsCarryElementPaths) {
  Megamodel m = fixture_fld("fld/self-repair-monolithic.fld");
  m.find_operation("Repair")->exits.clear();
  Diagnostics d = check_megamodel(m);
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d.front().path, "op:Repair");
}

TEST(CheckMegamodel, IsPure) {
  Megamodel m = fixture_fld("fld/self-repair-monolithic.fld");
  Megamodel copy = m;
  check_megamodel(m);
  signature_of(m);
  mape_label(m);
  EXPECT_EQ(m, copy);
}

TEST(CheckArchitecture, FixturesAreClean) {
  for (const std::string& f : corpus_files("ld", ".ld")) {
    Diagnostics d = diagnose_text(f, fixture_text(f));
    EXPECT_TRUE(d.empty()) << f << ": " << (d.empty() ? "" : format_diagnostic(d.front()));
  }
  for (const std::string& f : corpus_files("scenarios", ".ld")) EXPECT_TRUE(diagnose_text(f, fixture_text(f)).empty()) << f;
}

TEST(CheckArchitecture, UpwardEffectIsRejected) {
  ArchitectureDecl a = fixture_ld("ld/self-repair-strategies.ld");
  a.effects.push_back(EffectEdge{"selfRepair", "strategies", EffectMode::write});
  MegamodelRegistry reg = fixture_registry();
  EXPECT_TRUE(has_code(check_architecture(a, ArchitectureContext{&reg}), "E-LAYER-DIR"));
}

TEST(CheckArchitecture, SignatureSetEquality) {
  ArchitectureDecl a = fixture_ld("ld/self-repair.ld");
  MegamodelRegistry reg = fixture_registry();
  // An analysis loop that can only end OK does not cover {OK, Failures}.
  Megamodel only_ok = reg.at("Self-repair-A");
  only_ok.name = "Only-OK";
  std::erase_if(only_ok.states, [](const ControlState& s) { return s.name == "Failures"; });
  for (FlowEdge& f : only_ok.flows)
    if (f.target.node == "Failures") f.target = Endpoint{"OK", {}};
  for (DecisionBranch& b : only_ok.decisions.front().branches)
    if (b.target.node == "Failures") b.target = Endpoint{"OK", {}};
  ASSERT_TRUE(check_megamodel(only_ok).empty());
  reg[only_ok.name] = only_ok;
  for (ModuleDecl& m : a.modules)
    if (m.instance == "selfRepairA") m.source_ref = "Only-OK";
  EXPECT_TRUE(has_code(check_architecture(a, ArchitectureContext{&reg}), "E-SIG-MISMATCH"));
}

TEST(Equivalent, IgnoresEdgeOrder) {
  ArchitectureDecl a = fixture_ld("ld/self-repair-strategies.ld");
  ArchitectureDecl b = a;
  std::reverse(b.uses.begin(), b.uses.end());
  std::reverse(b.senses.begin(), b.senses.end());
  EXPECT_TRUE(equivalent(a, b));
  b.uses.pop_back();
  EXPECT_FALSE(equivalent(a, b));
}

TEST(CorruptionCorpus, EveryCaseYieldsItsRule) {
  std::vector<Corruption> corpus = corruption_corpus();
  EXPECT_GE(corpus.size(), 30u);
  for (const Corruption& c : corpus) {
    Diagnostics d = diagnose(c);
    std::string got;
    for (const Diagnostic& x : d) got += x.code + " ";
    EXPECT_TRUE(has_code(d, c.code)) << c.name << ": expected " << c.code << ", got " << got;
  }
}
