#pragma once
// Shared fixture worlds: small graphs, benchmark samples and authored
// completion sequences for scripted episodes. fixture_gen freezes these into
// the committed fixture files; eval tests replay them in-process.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphqa/agent.hpp"
#include "graphqa/dataset.hpp"
#include "graphqa/kg.hpp"
#include "graphqa/llm.hpp"
#include "sequence_backend.hpp"

namespace testsupport {

using namespace graphqa;

// ------------------------------------------------------------- cupertino world ----

inline std::string cupertino_graph_tsv() {
    return "# Apple headquarters world\n"
           "m.apple\tcompany.founder\tm.jobs\n"
           "m.apple\tcompany.headquarter\tm.cup\n"
           "m.apple\tcompany.ceo\tm.cook\n"
           "m.cup\tlocation.timezone\tm.pst\n"
           "m.cup\tlocation.located_in\tm.cal\n"
           "m.cup\tlocation.adjoin\tm.pal\n"
           "@label\tm.apple\tApple Inc\n"
           "@label\tm.jobs\tSteve Jobs\n"
           "@label\tm.cook\tTim Cook\n"
           "@label\tm.cup\tCupertino\n"
           "@label\tm.pst\tPacific Standard Time\n"
           "@label\tm.cal\tCalifornia\n"
           "@label\tm.pal\tPalo Alto\n";
}

inline BenchmarkSample cupertino_sample() {
    BenchmarkSample s;
    s.id = "cupertino";
    s.question = "What is the timezone of the area where Apple headquarters is located?";
    s.topic_entities = {{"m.apple", "Apple Inc"}};
    s.answers = {{"m.pst", "Pacific Standard Time", {"PST"}}};
    s.gold_query =
        "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
        "SELECT DISTINCT ?x WHERE {\n"
        "  ns:m.apple ns:company.headquarter ?c .\n"
        "  ?c ns:location.timezone ?x .\n"
        "}";
    return s;
}

inline std::vector<std::string> cupertino_ckg_sequence() {
    return {
        "Thought 1: I need to find out where is the Apple's headquarters.\n"
        "Action 1: Search[Apple Inc]",

        "[company.headquarter]",

        "Thought 2: Apple's headquarters is in Cupertino. I need to find the timezone of "
        "Cupertino.\n"
        "Action 2: Search[Cupertino]",

        "[location.timezone]",

        "Thought 3: Cupertino is in the Pacific Standard Time zone. I should confirm this "
        "timezone entity.\n"
        "Action 3: Search[Pacific Standard Time]",

        "Thought 4: Apple's headquarters is located in Cupertino, which uses Pacific Standard "
        "Time.\n"
        "Action 4: Finish[Pacific Standard Time]",
    };
}

inline std::vector<std::string> cupertino_ikg_sequence() {
    return {
        "Thought 1: I need to find out where is the Apple's headquarters.\n"
        "Action 1: Search[Apple Inc]",

        "[company.headquarter]",

        "Thought 2: Apple's headquarters is in Cupertino. I need to find the timezone of "
        "Cupertino.\n"
        "Action 2: Search[Cupertino]",

        "[location.located_in, location.adjoin]",

        "Thought 3: There is no timezone information for Cupertino in the graph. I need to "
        "generate new triples based on the known triples and my inherent knowledge.\n"
        "Action 3: Generate[the timezone of Cupertino]",

        "(Cupertino, timezone, Pacific Standard Time)",

        "(Cupertino, timezone, Pacific Standard Time)\n"
        "(Cupertino, timezone, Mountain Standard Time)",

        "(Cupertino, timezone, Pacific Standard Time)",

        "(Cupertino, timezone, Pacific Standard Time)",

        "Thought 4: Cupertino uses the Pacific Standard Time zone.\n"
        "Action 4: Finish[Pacific Standard Time]",
    };
}

// ------------------------------------------------------ appalachian world ----

inline std::string appalachian_graph_tsv(bool with_containedby) {
    std::string tsv =
        "m.appal\tlocation.contains\tm.brasstown\n"
        "m.appal\tlocation.contains\tm.craggy\n"
        "m.appal\tlocation.geolocation\tm.02_qbv6\n"
        "m.bald\tmountain.mountain_range\tm.appal\n"
        "m.spauld\tmountain.mountain_range\tm.appal\n"
        "m.oldrag\tmountain.mountain_range\tm.appal\n";
    if (with_containedby) tsv += "m.appal\tlocation.location.containedby\tm.noram\n";
    tsv +=
        "@label\tm.appal\tAppalachian Mountains\n"
        "@label\tm.brasstown\tBrasstown Bald\n"
        "@label\tm.craggy\tCraggy Dome\n"
        "@label\tm.bald\tBald Eagle Mountain\n"
        "@label\tm.spauld\tSpaulding Mountain\n"
        "@label\tm.oldrag\tOld Rag Mountain\n"
        "@label\tm.noram\tNorth America\n";
    return tsv;
}

inline BenchmarkSample appalachian_sample() {
    BenchmarkSample s;
    s.id = "appalachian";
    s.question = "Where do the Appalachian Mountains run?";
    s.topic_entities = {{"m.appal", "Appalachian Mountains"}};
    s.answers = {{"m.noram", "North America", {}}};
    s.gold_query =
        "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
        "SELECT DISTINCT ?x WHERE { ns:m.appal ns:location.location.containedby ?x . }";
    return s;
}

// Used both on the IKG view (containedby dropped) and on the evalworld CKG
// graph that simply lacks the edge; the call pattern is identical.
inline std::vector<std::string> appalachian_sequence() {
    return {
        "Thought 1: I need to search the Appalachian Mountains to find out where they run.\n"
        "Action 1: Search[Appalachian Mountains]",

        "[location.contains, mountain.mountain_range, location.geolocation]",

        "Thought 2: The Appalachian Mountains contain various locations and are part of "
        "geolocations. To find out where they run, I need to generate some new triples based on "
        "these given triples and my inherent knowledge.\n"
        "Action 2: Generate[where do the Appalachian Mountains run]",

        "(Appalachian Mountains, geographical_feature.contains_location, Blue Ridge Mountains)\n"
        "(Appalachian Mountains, geographical_feature.start_location, Alabama)",

        "(Appalachian Mountains, geographical_feature.start_location, Alabama)\n"
        "(Appalachian Mountains, geographical_feature.start_location, North America)",

        "(Appalachian Mountains, geographical_feature.start_location, North America)",

        "(Appalachian Mountains, geographical_feature.contains_location, Blue Ridge Mountains)\n"
        "(Appalachian Mountains, geographical_feature.start_location, Alabama)\n"
        "(Appalachian Mountains, geographical_feature.start_location, North America)",

        "none",  // no existing entity matches "Blue Ridge Mountains"

        "Thought 3: The Appalachian Mountains start from Alabama and run into North America.\n"
        "Action 3: Finish[Alabama | North America]",
    };
}

// ---------------------------------------------------------- paisley world ----

inline std::string paisley_graph_tsv() {
    return "m.tour\tconcert_tour.artist\tm.brad\n"
           "m.brad\tperson.education\tm.0h3d7qb\n"
           "m.brad\tperson.education\tm.0h3d7qj\n"
           "m.brad\tperson.education\tm.0n1dd_6\n"
           "m.0h3d7qb\teducation.institution\tm.jmhs\n"
           "m.0h3d7qj\teducation.institution\tm.belmont\n"
           "m.0h3d7qj\teducation.major_field_of_study\tm.music\n"
           "m.0n1dd_6\teducation.institution\tm.wlu\n"
           "@label\tm.tour\tCountry Nation World Tour\n"
           "@label\tm.brad\tBrad Paisley\n"
           "@label\tm.jmhs\tJohn Marshall High School\n"
           "@label\tm.belmont\tBelmont University\n"
           "@label\tm.music\tMusic\n"
           "@label\tm.wlu\tWest Liberty University\n";
}

inline BenchmarkSample paisley_sample() {
    BenchmarkSample s;
    s.id = "paisley";
    s.question = "Where did the Country Nation World Tour concert artist go to college?";
    s.topic_entities = {{"m.tour", "Country Nation World Tour"}};
    s.answers = {{"m.belmont", "Belmont University", {}}};
    s.gold_query =
        "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
        "SELECT DISTINCT ?x WHERE {\n"
        "  ns:m.tour ns:concert_tour.artist ?a .\n"
        "  ?a ns:person.education ?e .\n"
        "  ?e ns:education.institution ?x .\n"
        "}";
    return s;
}

inline std::vector<std::string> paisley_sequence() {
    return {
        "Thought 1: I need to find the artist who performed the Country Nation World Tour and "
        "then find out where they went to college.\n"
        "Action 1: Search[Country Nation World Tour]",

        "Thought 2: Brad Paisley performed the Country Nation World Tour, so I need to find out "
        "where Brad Paisley went to college.\n"
        "Action 2: Search[Brad Paisley]",

        "[person.education]",

        "Thought 3: m.0h3d7qb, m.0h3d7qj and m.0n1dd_6 could be CVT nodes, I need to further "
        "search them.\n"
        "Action 3: Search[m.0h3d7qb | m.0h3d7qj | m.0n1dd_6]",

        "[education.institution]",

        "[education.institution, education.major_field_of_study]",

        "[education.institution]",

        "Thought 4: Based on the given observations, Brad Paisley went to Belmont University.\n"
        "Action 4: Finish[Belmont University]",
    };
}

// --------------------------------------------------------- syracuse world ----

inline std::string syracuse_graph_tsv() {
    return "m.syr\torganization.headquarters\tm.0_gdsbw\n"
           "m.syr\torganization.parent\tm.0105kgwd\n"
           "m.0_gdrcn\taward_honor.award_winner\tm.syr\n"
           "@label\tm.syr\tSyracuse University Athletics\n";
}

inline BenchmarkSample syracuse_sample() {
    BenchmarkSample s;
    s.id = "syracuse";
    s.question = "What is Syracuse University Athletics' mascot?";
    s.topic_entities = {{"m.syr", "Syracuse University Athletics"}};
    s.answers = {{"m.otto", "Otto the Orange", {}}};
    s.gold_query =
        "PREFIX ns: <http://rdf.freebase.com/ns/>\n"
        "SELECT DISTINCT ?x WHERE { ns:m.syr ns:athletics_brand.mascot ?x . }";
    return s;
}

inline std::vector<std::string> syracuse_sequence() {
    return {
        "Thought 1: I need to find the mascot of Syracuse University Athletics.\n"
        "Action 1: Search[Syracuse University Athletics]",

        "[organization.headquarters, organization.parent]",

        "Thought 2: There is no information about the mascot of Syracuse University Athletics, "
        "so I need to generate more triples based on these given triples and my inherent "
        "knowledge.\n"
        "Action 2: Generate[What is the mascot of Syracuse University Athletics]",

        "(Syracuse University Athletics, athletics_brand.mascot, Orangemen)",

        "(Syracuse University Athletics, athletics_brand.mascot, Orangemen)",

        "(Syracuse University Athletics, athletics_brand.mascot, Orangemen)",

        "(Syracuse University Athletics, athletics_brand.mascot, Orangemen)",

        "Thought 3: The mascot of Syracuse University Athletics is Orangemen.\n"
        "Action 3: Finish[Orangemen]",
    };
}

// --------------------------------------------------------- rollback world ----

inline std::string rollback_graph_tsv() {
    return "m.a\tr1\tm.b\n"
           "m.b\tr2\tm.c\n"
           "@label\tm.a\tA\n"
           "@label\tm.b\tB\n"
           "@label\tm.c\tC\n";
}

inline BenchmarkSample rollback_sample() {
    BenchmarkSample s;
    s.id = "rollback";
    s.question = "What lies two hops from A?";
    s.topic_entities = {{"m.a", "A"}};
    s.answers = {{"m.c", "C", {}}};
    s.gold_query = "PREFIX ns: <http://rdf.freebase.com/ns/> SELECT ?x WHERE { ns:m.a ns:r1 ?x . }";
    return s;
}

inline std::vector<std::string> rollback_sequence() {
    return {
        "Thought 1: I need to search A.\n"
        "Action 1: Search[A]",

        "Thought 2: I cannot tell from the observation.\n"
        "Action 2: Finish[unknown]",

        "[r2]",  // second-hop relation filter at B during the rollback

        "Thought 3: I still cannot tell.\n"
        "Action 3: Finish[unknown]",
    };
}

// -------------------------------------------------------------- e2e world ----
// Sequences that work on any view the seed produces: the filtered relation is
// never crucial and the generated fact never collides with a KG relation.

inline std::vector<std::string> cupertino_e2e_sequence() {
    return {
        "Thought 1: I need to find out about Apple Inc.\n"
        "Action 1: Search[Apple Inc]",

        "[company.founder]",

        "Thought 2: I cannot see the timezone directly. I need to generate new triples.\n"
        "Action 2: Generate[the timezone of the Apple headquarters area]",

        "(Cupertino, timezone, Pacific Standard Time)",
        "(Cupertino, timezone, Pacific Standard Time)",
        "(Cupertino, timezone, Pacific Standard Time)",
        "(Cupertino, timezone, Pacific Standard Time)",

        "Thought 3: The Apple headquarters area uses Pacific Standard Time.\n"
        "Action 3: Finish[Pacific Standard Time]",
    };
}

inline std::vector<std::string> appalachian_e2e_sequence() {
    return {
        "Thought 1: I need to look at the Appalachian Mountains.\n"
        "Action 1: Search[Appalachian Mountains]",

        "[location.contains]",

        "Thought 2: I need to generate where they run.\n"
        "Action 2: Generate[where do the Appalachian Mountains run]",

        "(Appalachian Mountains, geographical_feature.start_location, North America)",
        "(Appalachian Mountains, geographical_feature.start_location, North America)",
        "(Appalachian Mountains, geographical_feature.start_location, North America)",
        "(Appalachian Mountains, geographical_feature.start_location, North America)",

        "Thought 3: They run through North America.\n"
        "Action 3: Finish[North America]",
    };
}

// ----------------------------------------------------------------- runner ----

struct RecordedEpisode {
    AgentResult result;
    std::vector<ScriptedBackend::Entry> entries;
};

// Drives one episode with a linear completion sequence and returns the trace
// plus digest-keyed script entries. Throws when the authored sequence does
// not fit the implementation's call pattern.
inline RecordedEpisode run_recorded(const KnowledgeGraph& graph, const BenchmarkSample& sample,
                                    const std::vector<Triple>& removed,
                                    std::vector<std::string> completions,
                                    const AgentConfig& config = {},
                                    const DecodingParams& decoding = {}) {
    auto backend = std::make_shared<SequenceBackend>(std::move(completions));
    LlmGateway gateway(backend, default_templates());
    GraphView view(graph, removed);
    Agent agent(view, gateway, config, decoding, sample.question, sample.topic_entities);
    RecordedEpisode episode;
    episode.result = agent.run(sample.id);
    if (episode.result.termination == Termination::Error)
        throw std::runtime_error("episode '" + sample.id +
                                 "' errored: " + episode.result.termination_detail);
    if (backend->remaining() != 0)
        throw std::runtime_error("episode '" + sample.id + "' left " +
                                 std::to_string(backend->remaining()) + " completions unused");
    episode.entries = backend->recorded();
    return episode;
}

}  // namespace testsupport
