//! The fixture world served over real HTTP and reached through the
//! blocking client's proxy setting.

use std::sync::Arc;
use std::thread;

use trialkb::config::PipelineConfig;
use trialkb::fetch::{Fetcher, HttpConfig, HttpFetcher};
use trialkb::fixtures::{serve_fixtures, FixtureFetcher, FixtureWorld, WorldVersion};
use trialkb::model::EntityId;
use trialkb::pipeline;
use trialkb::{FixedClock, Timestamp};

struct Server {
    proxy: String,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<thread::JoinHandle<()>>,
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            h.join().unwrap();
        }
    }
}

fn start(world: Arc<FixtureWorld>) -> Server {
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let handle = thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(serve_fixtures(
            world,
            "127.0.0.1:0".parse().unwrap(),
            move |a| addr_tx.send(a).unwrap(),
            async move {
                let _ = stop_rx.await;
            },
        ))
        .unwrap();
    });
    let addr = addr_rx.recv().unwrap();
    Server {
        proxy: format!("http://{addr}"),
        stop: Some(stop_tx),
        handle: Some(handle),
    }
}

fn world() -> Arc<FixtureWorld> {
    Arc::new(FixtureWorld::bundled(WorldVersion::V1).unwrap())
}

#[test]
fn proxied_responses_match_in_process_ones() {
    let w = world();
    let server = start(w.clone());
    let http = HttpFetcher::new(&HttpConfig {
        proxy: Some(server.proxy.clone()),
        ..Default::default()
    })
    .unwrap();
    let local = FixtureFetcher::new(w);
    for url in [
        "http://registry.fixture.test/query?term=Novagenix&size=10&page=1",
        "http://registry.fixture.test/query?term=zzz-nothing&size=10&page=1",
        "http://www.orbis-clinical.test/",
        "http://www.orbis-clinical.test/robots.txt",
        "http://www.orbis-clinical.test/missing-page",
    ] {
        let a = http.fetch(url).unwrap();
        let b = local.fetch(url).unwrap();
        assert_eq!((a.status, &a.body), (b.status, &b.body), "{url}");
    }
}

#[test]
fn harvest_through_proxy_equals_in_process_harvest() {
    let w = world();
    let server = start(w.clone());
    let clock = FixedClock::new(Timestamp::from_unix(1_700_000_000));
    let company = EntityId::from("co-00003");

    let run = |proxy: Option<String>| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.kb.path = dir.path().join("kb");
        cfg.http.delay_ms = 0;
        cfg.http.proxy = proxy.clone();
        cfg.fixtures.enabled = proxy.is_none();
        let mut store = w.seed_store(&cfg.kb.path).unwrap();
        let fetcher = pipeline::build_fetcher(&cfg).unwrap();
        let registry = pipeline::load_adapters(&cfg).unwrap();
        let adapters = pipeline::select_adapters(&registry, &cfg).unwrap();
        let (summary, _) =
            pipeline::harvest(&mut store, &adapters, fetcher.as_ref(), &clock, &cfg, Some(&company)).unwrap();
        let trials: Vec<_> = store.kb.trials().cloned().collect();
        (summary.records, summary.fetches, trials)
    };
    let over_http = run(Some(server.proxy.clone()));
    let in_process = run(None);
    assert!(over_http.0 > 0);
    assert_eq!(over_http, in_process);
}
