mod common;

use std::sync::Arc;

use benchgen::extraction::{resolve_python, ExtractionError, ExtractionSettings, Extractor};
use benchgen::fetch::MapFetcher;
use benchgen::llm::gateway::Gateway;
use benchgen::llm::scripted::{Rule, ScriptedProvider};
use benchgen::repo::Mirror;
use benchgen_core::context::{SourceKind, SourceSelection};
use benchgen_core::{CommandSet, Date};

const FILES: &str = "I will provide you a list of filenames";
const HARVEST: &str = "identify all external links";
const RELEVANCE: &str = "determine if it includes installation instructions";
const INSTALL: &str = "identify and return the bash commands necessary for the correct installation";
const TEST: &str = "identify and return the exact bash commands required to run the tests";
const REPROMPT: &str = "did not follow the required format";

fn gateway(extra: &[(&[&str], &str)]) -> Gateway {
    let mut rules: Vec<Rule> = extra
        .iter()
        .map(|(w, r)| Rule {
            when: w.iter().map(|s| s.to_string()).collect(),
            reply: r.to_string(),
            times: None,
        })
        .collect();
    let base: [(&[&str], &str); 6] = [
        (&[FILES], "<ANSWER>: README.md, NOTES.txt\n<REASONING>: the readme"),
        (
            &[HARVEST],
            "LINK: https://toy.example/install\nLINK: https://toy.example/gone\nLINK: https://toy.example/other\nLINK: https://toy.example/install/",
        ),
        (&[RELEVANCE, "toy.example/install"], "INSTALLATION/TEST COMMANDS: TRUE\nREASONING: steps"),
        (&[RELEVANCE], "maybe"),
        (&[REPROMPT], "still maybe"),
        (&[INSTALL], "```bash\npython -m venv env\npip install -r requirements.txt\n```"),
    ];
    rules.extend(base.iter().map(|(w, r)| Rule {
        when: w.iter().map(|s| s.to_string()).collect(),
        reply: r.to_string(),
        times: None,
    }));
    rules.push(Rule {
        when: vec![TEST.into()],
        reply: "```bash\nsource env/bin/activate\n```".into(),
        times: None,
    });
    Gateway::new(Arc::new(ScriptedProvider::new(rules)), "fixture", 0)
}

fn fetcher() -> MapFetcher {
    MapFetcher::new([
        (
            "https://toy.example/install",
            "<html><body><p>Run pip install -r requirements.txt</p></body></html>",
        ),
        ("https://toy.example/other", "Unrelated page"),
    ])
}

fn repo(dir: &std::path::Path) -> (Mirror, String) {
    let (origin, head) = common::repo_with(
        dir,
        &[
            ("README.md", "# toy\nSee https://toy.example/install\n"),
            ("docs/setup.md", "Setup notes\n"),
            (".github/workflows/ci.yml", "steps:\n  - run: pytest\n"),
            (
                "setup.py",
                "from setuptools import setup\nsetup(name='toy', python_requires='>=3.7,<3.10')\n",
            ),
            ("toy/__init__.py", ""),
        ],
    );
    (Mirror::clone_from(origin.to_str().unwrap()).unwrap(), head)
}

fn cutoff() -> Date {
    Date::new(2022, 4, 11).unwrap()
}

#[test]
fn files_pages_and_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirror, head) = repo(tmp.path());
    let gw = gateway(&[]);
    let fetch = fetcher();
    let ex = Extractor {
        gateway: &gw,
        fetcher: &fetch,
        settings: ExtractionSettings::default(),
    };
    assert_eq!(resolve_python(&mirror, &head, cutoff()).unwrap(), "3.9");

    let out = ex.extract(&mirror, &head, "toy/a", cutoff(), None).unwrap();
    assert!(!out.from_reference);
    let accepted: Vec<&str> = out
        .sources
        .iter()
        .filter(|s| s.accepted)
        .map(|s| s.locator.as_str())
        .collect();
    assert_eq!(
        accepted,
        ["README.md", ".github/workflows/ci.yml", "https://toy.example/install"]
    );
    let pages: Vec<&str> = out
        .sources
        .iter()
        .filter(|s| s.kind == SourceKind::WebPage)
        .map(|s| s.locator.as_str())
        .collect();
    assert_eq!(pages, ["https://toy.example/install", "https://toy.example/other"]);
    let page = &out
        .sources
        .iter()
        .find(|s| s.kind == SourceKind::WebPage)
        .unwrap()
        .content;
    assert!(page.contains("Run pip install") && !page.contains('<'));

    assert_eq!(out.cmds.python_version, "3.9");
    assert_eq!(
        out.cmds.install,
        ["uv pip install -r requirements.txt --exclude-newer 2022-04-11"]
    );
    assert_eq!(out.cmds.test, ["pytest"]);
}

#[test]
fn page_budget_and_source_ablations() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirror, head) = repo(tmp.path());
    let gw = gateway(&[]);
    let fetch = fetcher();
    let with = |settings: ExtractionSettings| {
        let ex = Extractor {
            gateway: &gw,
            fetcher: &fetch,
            settings,
        };
        ex.extract(&mirror, &head, "toy/a", cutoff(), None).unwrap().sources
    };
    let one = with(ExtractionSettings {
        max_pages: 1,
        ..ExtractionSettings::default()
    });
    assert_eq!(one.iter().filter(|s| s.kind == SourceKind::WebPage).count(), 1);

    let offline = with(ExtractionSettings {
        browsing: false,
        ..ExtractionSettings::default()
    });
    assert!(offline.iter().all(|s| s.kind != SourceKind::WebPage));

    let cicd = with(ExtractionSettings {
        sources: SourceSelection::CicdOnly,
        ..ExtractionSettings::default()
    });
    assert!(cicd.iter().all(|s| s.kind == SourceKind::CicdFile));

    let text = with(ExtractionSettings {
        sources: SourceSelection::TextOnly,
        ..ExtractionSettings::default()
    });
    assert!(text.iter().all(|s| s.kind != SourceKind::CicdFile));
    assert!(text.iter().any(|s| s.kind == SourceKind::WebPage));
}

#[test]
fn reference_commands_skip_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirror, head) = repo(tmp.path());
    let silent = Gateway::new(Arc::new(ScriptedProvider::new(Vec::new())), "fixture", 0);
    let fetch = fetcher();
    let ex = Extractor {
        gateway: &silent,
        fetcher: &fetch,
        settings: ExtractionSettings::default(),
    };
    let reference = CommandSet {
        python_version: "3.8".into(),
        install: vec!["uv pip install -e . --exclude-newer 2021-01-01".into()],
        test: vec!["pytest -rA".into()],
        cutoff_date: Date::new(2021, 1, 1).unwrap(),
    };
    let out = ex.extract(&mirror, &head, "toy/a", cutoff(), Some(reference)).unwrap();
    assert!(out.from_reference && out.sources.is_empty());
    assert_eq!(out.cmds.install, ["uv pip install -e . --exclude-newer 2022-04-11"]);
    assert_eq!(out.cmds.cutoff_date, cutoff());
}

#[test]
fn empty_answers_mean_no_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirror, head) = repo(tmp.path());
    let gw = gateway(&[(&[INSTALL], "```bash\n```"), (&[TEST], "```bash\n```")]);
    let fetch = fetcher();
    let ex = Extractor {
        gateway: &gw,
        fetcher: &fetch,
        settings: ExtractionSettings::default(),
    };
    let err = ex.extract(&mirror, &head, "toy/a", cutoff(), None).unwrap_err();
    assert!(matches!(err, ExtractionError::NoCommandsExtracted), "{err}");
}
