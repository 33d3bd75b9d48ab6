#pragma once

#include "kgqa/actions.hpp"
#include "kgqa/kg.hpp"

namespace kgqa_test {

// Three triples: (a,r1,x), (b,r1,x), (b,r1,y); a,b : Person; x,y : Instrument.
inline kgqa::KnowledgeGraph kg0() {
    kgqa::KgBuilder b;
    b.add_type("Person").add_type("Instrument");
    b.add_relation("r1");
    b.add_entity("a", {"Person"}).add_entity("b", {"Person"});
    b.add_entity("x", {"Instrument"}).add_entity("y", {"Instrument"});
    b.add_triple("a", "r1", "x").add_triple("b", "r1", "x").add_triple("b", "r1", "y");
    return b.build();
}

inline kgqa::Artifact art(kgqa::ArtifactKind kind, const std::string& id, int start = 0,
                          int end = 0) {
    kgqa::Artifact a;
    a.kind = kind;
    a.id = id;
    a.start = start;
    a.end = end;
    return a;
}

inline kgqa::ArgumentSet kg0_args() {
    using kgqa::ArtifactKind;
    kgqa::ArgumentSet args;
    args.items = {
        art(ArtifactKind::Entity, "b", 0, 1),
        art(ArtifactKind::Relation, "r1", 2, 4),
        art(ArtifactKind::Type, "Instrument", 5, 15),
        art(ArtifactKind::Entity, "x", 16, 17),
        art(ArtifactKind::Entity, "a", 18, 19),
    };
    return args;
}

inline kgqa::Action make_action(kgqa::Func f, std::vector<kgqa::Artifact> args = {}) {
    kgqa::Action a;
    a.func = f;
    a.args = std::move(args);
    return a;
}

}  // namespace kgqa_test
