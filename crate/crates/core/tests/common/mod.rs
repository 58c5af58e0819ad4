#![allow(dead_code)]

pub mod dexbuilder;
pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use adscope::ingest::{AppRecord, CorpusManifest, InstallBucket, RawEdge, ScanRecord, CANONICAL_BUCKETS};
use adscope::privclass::PrivacyCategory;
use adscope::{CallEdge, InvokeKind, MethodRef};
use rand::seq::SliceRandom;
use rand::Rng;

use dexbuilder::{DexBuilder, MethodSpec, Op};

use PrivacyCategory::*;

/// Hand-written catalogue of library methods and the category each one must
/// end up with under the shipped rules.
pub struct LibDef {
    pub name: &'static str,
    /// Class descriptors, possibly under several alias packages.
    pub classes: &'static [&'static str],
    pub methods: &'static [(&'static str, &'static str, Option<PrivacyCategory>)],
}

pub const CATALOGUE: &[LibDef] = &[
    LibDef {
        name: "AdMob",
        classes: &["Lcom/google/ads/AdRequest;", "Lcom/google/ads/AdView;", "Lcom/admob/android/ads/AdManager;"],
        methods: &[
            ("setGender", "(Lcom/google/ads/AdRequest$Gender;)Lcom/google/ads/AdRequest;", Some(Gender)),
            ("setBirthday", "(Ljava/lang/String;)Lcom/google/ads/AdRequest;", Some(Age)),
            ("setLocation", "(Landroid/location/Location;)Lcom/google/ads/AdRequest;", Some(Location)),
            ("addKeyword", "(Ljava/lang/String;)Lcom/google/ads/AdRequest;", Some(Keywords)),
            ("loadAd", "(Lcom/google/ads/AdRequest;)V", None),
            ("<init>", "()V", None),
        ],
    },
    LibDef {
        name: "Flurry",
        classes: &["Lcom/flurry/android/FlurryAgent;"],
        methods: &[
            ("onStartSession", "(Landroid/content/Context;Ljava/lang/String;)V", None),
            ("logEvent", "(Ljava/lang/String;)V", Some(ArbitraryData)),
            ("setAge", "(I)V", Some(Age)),
            ("setGender", "(B)V", Some(Gender)),
        ],
    },
    LibDef {
        name: "AirPush",
        classes: &["Lcom/airpush/android/Airpush;"],
        methods: &[("setDemographics", "(Ljava/util/Map;)V", Some(MultipleFactors)), ("startPushNotification", "(Z)V", None)],
    },
    LibDef {
        name: "InMobi",
        classes: &["Lcom/inmobi/androidsdk/IMAdRequest;"],
        methods: &[
            ("setEducation", "(I)V", Some(Education)),
            ("setEthnicity", "(I)V", Some(Ethnicity)),
            ("setAreaCode", "(Ljava/lang/String;)V", Some(AreaCode)),
            ("setRequestParams", "(Ljava/util/Map;)V", Some(MultipleFactors)),
            ("setTestMode", "(Z)V", None),
        ],
    },
    LibDef {
        name: "AdWhirl",
        classes: &["Lcom/adwhirl/AdWhirlTargeting;", "Lcom/adwhirl/AdWhirlLayout;"],
        methods: &[("setKeywords", "(Ljava/lang/String;)V", Some(Keywords)), ("setAge", "(I)V", Some(Age)), ("rotateAd", "()V", None)],
    },
    LibDef {
        name: "MoPub",
        classes: &["Lcom/mopub/mobileads/MoPubView;"],
        methods: &[("setKeywords", "(Ljava/lang/String;)V", Some(Keywords)), ("loadAd", "()V", None)],
    },
    LibDef {
        name: "JumpTap",
        classes: &["Lcom/jumptap/adtag/JtAdWidgetSettings;"],
        methods: &[("setHHI", "(Ljava/lang/String;)V", Some(Income)), ("setCountry", "(Ljava/lang/String;)V", Some(Country))],
    },
    LibDef {
        name: "AppLovin",
        classes: &["Lcom/applovin/sdk/AppLovinTargetingData;"],
        methods: &[("setName", "(Ljava/lang/String;)V", Some(Name)), ("setEmail", "(Ljava/lang/String;)V", Some(EMail))],
    },
    LibDef {
        name: "TapJoy",
        classes: &["Lcom/tapjoy/TapjoyConnect;"],
        methods: &[("requestTapjoyConnect", "(Landroid/content/Context;Ljava/lang/String;)V", None)],
    },
    LibDef {
        name: "GreyStripe",
        classes: &["Lcom/greystripe/android/sdk/GSSDK;"],
        methods: &[("initialize", "(Landroid/content/Context;Ljava/lang/String;)V", None)],
    },
];

pub fn lib(name: &str) -> &'static LibDef {
    CATALOGUE.iter().find(|l| l.name == name).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlantedCall {
    pub lib: &'static str,
    pub class: &'static str,
    pub method: &'static str,
    pub desc: &'static str,
    pub category: Option<PrivacyCategory>,
    pub sites: u32,
    pub kind: InvokeKind,
}

impl PlantedCall {
    pub fn method_ref(&self) -> MethodRef {
        MethodRef::from_descriptor(self.class, self.method, self.desc).unwrap()
    }
}

/// Ground truth of one synthetic app.
#[derive(Debug, Clone)]
pub struct SynthApp {
    pub id: String,
    pub bucket: InstallBucket,
    pub calls: Vec<PlantedCall>,
    /// Libraries present only through their own internal calls.
    pub dormant: Vec<&'static str>,
    /// Library-to-library calls: caller library, callee.
    pub mediation: Vec<(&'static str, PlantedCall)>,
    pub internal_calls: u32,
}

impl SynthApp {
    pub fn main_class(&self) -> String {
        format!("Lorg/synth/{}/Main;", self.id.replace('.', "_"))
    }

    pub fn contained(&self) -> BTreeSet<&'static str> {
        let mut s: BTreeSet<&str> = self.calls.iter().map(|c| c.lib).collect();
        s.extend(self.dormant.iter().copied());
        for (from, to) in &self.mediation {
            s.insert(from);
            s.insert(to.lib);
        }
        s
    }

    pub fn leak_pairs(&self) -> BTreeSet<(&'static str, PrivacyCategory)> {
        self.calls.iter().filter_map(|c| c.category.map(|cat| (c.lib, cat))).collect()
    }

    /// The call edges a scanner must produce for this app.
    pub fn edges(&self) -> Vec<CallEdge> {
        let main = self.main_class();
        let mut out = Vec::new();
        for c in &self.calls {
            for _ in 0..c.sites {
                out.push(CallEdge { app_id: self.id.clone(), caller_class: main.clone(), callee: c.method_ref(), invoke_kind: c.kind });
            }
        }
        for l in &self.dormant {
            let d = lib(l);
            let (name, desc, _) = d.methods[0];
            out.push(CallEdge {
                app_id: self.id.clone(),
                caller_class: d.classes[0].into(),
                callee: MethodRef::from_descriptor(d.classes[0], name, desc).unwrap(),
                invoke_kind: InvokeKind::Direct,
            });
        }
        for (from, to) in &self.mediation {
            out.push(CallEdge {
                app_id: self.id.clone(),
                caller_class: lib(from).classes[0].into(),
                callee: to.method_ref(),
                invoke_kind: to.kind,
            });
        }
        for i in 0..self.internal_calls {
            out.push(CallEdge {
                app_id: self.id.clone(),
                caller_class: main.clone(),
                callee: MethodRef::from_descriptor(&format!("Lorg/synth/util/Helper{};", i % 3), "work", "()V").unwrap(),
                invoke_kind: InvokeKind::Static,
            });
        }
        out
    }

    pub fn scan_record(&self) -> ScanRecord {
        ScanRecord { edges: self.edges().iter().map(RawEdge::from_edge).collect(), ..ScanRecord::default() }
    }

    pub fn record(&self, source: &str) -> AppRecord {
        AppRecord { app_id: self.id.clone(), source: source.into(), install_bucket: self.bucket, extra: Default::default() }
    }

    /// DEX image whose extracted edges equal `edges()` as a multiset.
    pub fn dex(&self) -> Vec<u8> {
        let mut body = Vec::new();
        for c in &self.calls {
            for _ in 0..c.sites {
                body.push(Op::Invoke { kind: c.kind, range: c.sites % 2 == 0, target: c.method_ref() });
            }
        }
        for i in 0..self.internal_calls {
            let t = MethodRef::from_descriptor(&format!("Lorg/synth/util/Helper{};", i % 3), "work", "()V").unwrap();
            body.push(Op::Invoke { kind: InvokeKind::Static, range: false, target: t });
        }
        body.push(Op::ReturnVoid);
        let mut b = DexBuilder::new().class(&self.main_class(), vec![MethodSpec::new("run", "()V", body)]);
        // One synthetic class per library-side caller, grouped by class.
        let mut lib_bodies: BTreeMap<&str, Vec<Op>> = BTreeMap::new();
        for l in &self.dormant {
            let d = lib(l);
            let (name, desc, _) = d.methods[0];
            lib_bodies.entry(d.classes[0]).or_default().push(Op::Invoke {
                kind: InvokeKind::Direct,
                range: false,
                target: MethodRef::from_descriptor(d.classes[0], name, desc).unwrap(),
            });
        }
        for (from, to) in &self.mediation {
            lib_bodies.entry(lib(from).classes[0]).or_default().push(Op::Invoke {
                kind: to.kind,
                range: true,
                target: to.method_ref(),
            });
        }
        for (class, mut ops) in lib_bodies {
            ops.push(Op::ReturnVoid);
            // Method name chosen so it never collides with a catalogue method.
            b = b.class(class, vec![MethodSpec::new("zzSynthDispatch", "()V", ops)]);
        }
        b.build()
    }

    pub fn call_log(&self) -> String {
        adscope::ingest::write_call_log(&self.edges())
    }
}

pub fn random_call<R: Rng>(rng: &mut R, d: &'static LibDef) -> PlantedCall {
    let (method, desc, category) = *d.methods.choose(rng).unwrap();
    PlantedCall {
        lib: d.name,
        class: d.classes.choose(rng).unwrap(),
        method,
        desc,
        category,
        sites: rng.gen_range(1..=3),
        kind: *InvokeKind::ALL.choose(rng).unwrap(),
    }
}

pub fn random_bucket<R: Rng>(rng: &mut R) -> InstallBucket {
    if rng.gen_bool(0.1) {
        InstallBucket::Unknown
    } else {
        InstallBucket::Known(*CANONICAL_BUCKETS.choose(rng).unwrap())
    }
}

pub fn random_app<R: Rng>(rng: &mut R, id: String) -> SynthApp {
    let mut app = SynthApp {
        id,
        bucket: random_bucket(rng),
        calls: vec![],
        dormant: vec![],
        mediation: vec![],
        internal_calls: rng.gen_range(0..4),
    };
    let n_libs = rng.gen_range(0..=4);
    for d in CATALOGUE.choose_multiple(rng, n_libs) {
        if rng.gen_bool(0.25) {
            app.dormant.push(d.name);
        } else {
            for _ in 0..rng.gen_range(1..=4) {
                app.calls.push(random_call(rng, d));
            }
        }
    }
    if rng.gen_bool(0.2) {
        let from = CATALOGUE.choose(rng).unwrap();
        let to = CATALOGUE.choose(rng).unwrap();
        app.mediation.push((from.name, random_call(rng, to)));
    }
    app
}

pub fn random_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<SynthApp> {
    (0..n).map(|i| random_app(rng, format!("app.{i:04}"))).collect()
}

pub fn manifest_of(apps: &[SynthApp], source: impl Fn(&SynthApp) -> String) -> CorpusManifest {
    CorpusManifest {
        apps: apps.iter().map(|a| a.record(&source(a))).collect(),
        registry_version: "top20-2013".into(),
        created: String::new(),
    }
}

/// Writes the corpus to `dir` mixing raw DEX, zipped DEX and call logs, plus
/// a manifest. Returns the manifest path.
pub fn write_corpus(dir: &Path, apps: &[SynthApp]) -> std::path::PathBuf {
    use std::io::Write;
    std::fs::create_dir_all(dir.join("apps")).unwrap();
    let mut sources = BTreeMap::new();
    for (i, a) in apps.iter().enumerate() {
        let rel = match i % 3 {
            0 => {
                let rel = format!("apps/{}.dex", a.id);
                std::fs::write(dir.join(&rel), a.dex()).unwrap();
                rel
            }
            1 => {
                let rel = format!("apps/{}.apk", a.id);
                let file = std::fs::File::create(dir.join(&rel)).unwrap();
                let mut z = zip::ZipWriter::new(file);
                let opts = zip::write::SimpleFileOptions::default();
                z.start_file("AndroidManifest.xml", opts).unwrap();
                z.write_all(b"<manifest/>").unwrap();
                z.start_file("classes.dex", opts).unwrap();
                z.write_all(&a.dex()).unwrap();
                z.finish().unwrap();
                rel
            }
            _ => {
                let rel = format!("apps/{}.calls.tsv", a.id);
                std::fs::write(dir.join(&rel), a.call_log()).unwrap();
                rel
            }
        };
        sources.insert(a.id.clone(), rel);
    }
    let manifest = manifest_of(apps, |a| sources[&a.id].clone());
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, adscope::ingest::write_manifest(&manifest)).unwrap();
    path
}

pub fn sorted<T: Ord + Clone>(v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    v.sort();
    v
}

const TYPES: &[&str] = &["I", "J", "Z", "Ljava/lang/String;", "[B", "Ljava/util/Map;", "[[Lcom/x/Y;", "D"];
const RETS: &[&str] = &["V", "I", "Ljava/lang/Object;", "[I", "Z"];

fn random_descriptor<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(0..4);
    let params: String = (0..n).map(|_| *TYPES.choose(rng).unwrap()).collect();
    format!("({params}){}", RETS.choose(rng).unwrap())
}

fn random_target<R: Rng>(rng: &mut R) -> MethodRef {
    let classes = ["Lcom/google/ads/AdView;", "Lcom/flurry/android/FlurryAgent;", "Lapp/Main;", "Ljava/lang/Object;", "Lé/ünï$Cödé;"];
    let names = ["<init>", "loadAd", "setGender", "run", "m\u{00e9}thode", "zz"];
    MethodRef::from_descriptor(classes.choose(rng).unwrap(), names.choose(rng).unwrap(), &random_descriptor(rng)).unwrap()
}

/// Random multi-class DEX fixture exercising every invoke kind, range forms,
/// payloads, wide instructions, const-strings and abstract methods.
pub fn random_fixture<R: Rng>(rng: &mut R) -> DexBuilder {
    let mut b = DexBuilder::new();
    b.version = Some(**[b"035", b"037", b"038", b"039"].choose(rng).unwrap());
    let n_classes = rng.gen_range(1..=5);
    for ci in 0..n_classes {
        let mut methods = Vec::new();
        let mut used = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=4) {
            let name = format!("m{}", rng.gen_range(0..6));
            let desc = random_descriptor(rng);
            if !used.insert((name.clone(), desc.clone())) {
                continue;
            }
            if rng.gen_bool(0.15) {
                methods.push(MethodSpec::abstract_(&name, &desc));
                continue;
            }
            let mut body = Vec::new();
            for _ in 0..rng.gen_range(0..12) {
                let op = match rng.gen_range(0..12) {
                    0..=4 => Op::Invoke {
                        kind: *InvokeKind::ALL.choose(rng).unwrap(),
                        range: rng.gen_bool(0.5),
                        target: random_target(rng),
                    },
                    5 => Op::ConstString(format!("anchor-{}", rng.gen_range(0..5))),
                    6 => Op::PackedSwitch(rng.gen_range(0..5)),
                    7 => Op::SparseSwitch(rng.gen_range(0..5)),
                    8 => Op::FillArray { width: *[1u16, 2, 4, 8].choose(rng).unwrap(), count: rng.gen_range(0..7) },
                    9 => [Op::Nop, Op::Move, Op::ConstWide, Op::Goto32].choose(rng).unwrap().clone(),
                    10 => Op::Polymorphic { target: random_target(rng) },
                    _ => Op::ConstStringJumbo(format!("jumbo-{}", rng.gen_range(0..3))),
                };
                body.push(op);
            }
            body.push(Op::ReturnVoid);
            let m = MethodSpec::new(&name, &desc, body);
            methods.push(if rng.gen_bool(0.5) { m.virtual_() } else { m });
        }
        b = b.class(&format!("Lfix/pkg{}/C{ci};", ci % 2), methods);
    }
    b
}
