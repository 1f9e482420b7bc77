mod common;

use common::mock::{completion, MockServer};
use sds_core::critic::{Critic, CriticConfig, RemoteCritic};
use sds_core::planner::{apply_strategy, GlobalPlan, InMemoryStore, StrategyMode};
use sds_core::proposal::{build_context, ComponentRole, ProposalError, RemoteGenerator, TopologyGenerator};
use sds_core::search::{expand, run_search, ExpansionContext, SearchConfig, SearchError, SearchMode, Tree};
use sds_core::SolventLibrary;

const GOOD: &str = include_str!("fixtures/proposal_good.txt");
const BENZENE: &str = include_str!("fixtures/proposal_benzene.txt");
const SIX: &str = include_str!("fixtures/proposal_six.txt");
const MALFORMED: &str = include_str!("fixtures/proposal_malformed.txt");
const CRITIC: &str = include_str!("fixtures/critic_reply.txt");

fn root_context(lib: &SolventLibrary) -> sds_core::proposal::GenerationContext {
    let plan = GlobalPlan::neutral(StrategyMode::Balanced);
    let d = apply_strategy(&plan, StrategyMode::Balanced, lib);
    build_context(&[], &[], &plan, &d, SearchMode::Full)
}

#[test]
fn well_formed_reply_becomes_a_proposal() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![completion(GOOD)]);
    let mut gen = RemoteGenerator::new(server.endpoint(), &lib, &t, &p);
    let prop = gen.propose(&root_context(&lib), 0).unwrap();
    assert_eq!(prop.components, vec!["Cyclohexanone", "n-Butyl acetate"]);
    assert_eq!(prop.declared_roles, Some(vec![Some(ComponentRole::Host), Some(ComponentRole::Leverage)]));
    assert_eq!(prop.advisory_percent, Some(vec![70.0, 30.0]));
    assert!(prop.rationale.starts_with("ketone host"));

    let reqs = server.requests.lock().unwrap();
    let messages = reqs[0]["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 2);
    assert_eq!(messages[0]["role"], "system");
    assert!(messages[0]["content"].as_str().unwrap().contains("Cyclohexanone"));
    assert!(!messages[0]["content"].as_str().unwrap().contains("Benzene |"));
    assert!(messages[1]["content"].as_str().unwrap().starts_with("GLOBAL PLAN"));
}

#[test]
fn prohibited_solvent_is_rejected() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![completion(BENZENE)]);
    let mut gen = RemoteGenerator::new(server.endpoint(), &lib, &t, &p);
    match gen.propose(&root_context(&lib), 0) {
        Err(ProposalError::InvalidProposal(m)) => assert!(m.contains("Benzene"), "{m}"),
        other => panic!("expected invalid proposal, got {other:?}"),
    }
}

#[test]
fn oversized_proposal_uses_up_every_attempt() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![completion(SIX), completion(SIX), completion(SIX)]);
    let mut gen = RemoteGenerator::new(server.endpoint(), &lib, &t, &p);
    let plan = GlobalPlan::neutral(StrategyMode::Balanced);
    let d = apply_strategy(&plan, StrategyMode::Balanced, &lib);
    let ectx = ExpansionContext { library: &lib, plan: &plan, directives: &d, iteration: 0 };
    let mut tree = Tree::new();
    match expand(&mut tree, Tree::ROOT, &mut gen, &SearchConfig::default(), &ectx) {
        Err(SearchError::GeneratorFailure { attempts, message }) => {
            assert_eq!(attempts, 3);
            assert!(message.contains("6 components"), "{message}");
        }
        other => panic!("expected generator failure, got {other:?}"),
    }
    assert_eq!(server.request_count(), 3);
    assert_eq!(tree.len(), 1);
}

#[test]
fn unparseable_reply_is_reprompted() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![completion(MALFORMED), completion(GOOD)]);
    let mut gen = RemoteGenerator::new(server.endpoint(), &lib, &t, &p);
    let prop = gen.propose(&root_context(&lib), 0).unwrap();
    assert_eq!(prop.components.len(), 2);

    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 2);
    let second = reqs[1]["messages"].as_array().unwrap();
    assert_eq!(second.len(), 4);
    assert_eq!(second[2]["role"], "assistant");
    assert_eq!(second[2]["content"], MALFORMED);
    assert!(second[3]["content"].as_str().unwrap().contains("FORMULATION:"));
}

#[test]
fn persistent_garbage_is_a_malformed_response() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![completion(MALFORMED); 3]);
    let mut gen = RemoteGenerator::new(server.endpoint(), &lib, &t, &p);
    assert!(matches!(gen.propose(&root_context(&lib), 0), Err(ProposalError::MalformedResponse(_))));
    assert_eq!(server.request_count(), 3);
}

#[test]
fn server_errors_are_retried() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![(503, "busy".into()), completion(GOOD)]);
    let mut cfg = server.endpoint();
    cfg.max_retries = 1;
    let mut gen = RemoteGenerator::new(cfg, &lib, &t, &p);
    assert!(gen.propose(&root_context(&lib), 0).is_ok());
    assert_eq!(server.request_count(), 2);
}

#[test]
fn unreachable_generator_aborts_the_search() {
    let lib = SolventLibrary::shipped();
    let (t, p) = (common::target(), common::protect());
    let server = MockServer::start(vec![(500, "down".into())]);
    let mut gen = RemoteGenerator::new(server.endpoint(), &lib, &t, &p);
    let critic = Critic::new(CriticConfig::default());
    let mut mem = InMemoryStore::new();
    let cfg = common::toy_engine(3, 5, SearchMode::Full);
    let err = run_search(&lib, &t, &p, &mut gen, &critic, &mut mem, &cfg).unwrap_err();
    assert!(matches!(err.error, SearchError::GeneratorTransport(_)), "{}", err.error);
}

#[test]
fn remote_critic_score_is_used() {
    let lib = SolventLibrary::shipped();
    let server = MockServer::start(vec![completion(CRITIC)]);
    let critic = Critic::with_backend(CriticConfig::default(), Box::new(RemoteCritic::new(server.endpoint())));
    let f = common::formulation(&[("Cyclohexanone", 0.9), ("n-Butyl acetate", 0.1)]);
    let r = critic.hybrid_score(&f, &lib, &common::target(), &common::protect()).unwrap();
    assert_eq!(r.qualitative_source, "remote");
    assert_eq!(r.rubric_points, 8.0);
    assert_eq!(r.score_qualitative, 80.0);
    assert_eq!(r.score_total, 0.5 * r.score_physics + 40.0);

    let reqs = server.requests.lock().unwrap();
    let user = reqs[0]["messages"][1]["content"].as_str().unwrap();
    assert!(user.contains("Cyclohexanone: 90%"), "{user}");
}

#[test]
fn unreachable_critic_falls_back_to_rubric() {
    let lib = SolventLibrary::shipped();
    let server = MockServer::start(vec![(500, "down".into())]);
    let critic = Critic::with_backend(CriticConfig::default(), Box::new(RemoteCritic::new(server.endpoint())));
    let f = common::formulation(&[("Cyclohexanone", 0.9), ("n-Butyl acetate", 0.1)]);
    let r = critic.hybrid_score(&f, &lib, &common::target(), &common::protect()).unwrap();
    assert_eq!(r.qualitative_source, "rubric");
    assert_eq!(r.rubric_points, f64::from(r.rubric.points));
    assert_eq!(r.events.len(), 1);
}
