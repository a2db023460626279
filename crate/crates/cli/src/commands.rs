use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use songembed::baselines::{ovr_train, CosineScorer, LabelKind, OvrModel};
use songembed::evaluation::{evaluate_with, RankMode};
use songembed::featurizer::{encode_counts, kmeans_fit, Codebook, FrameMatrix};
use songembed::synth::{gen_latent, gen_separable, SynthData, SynthSpec};
use songembed::trainer::{train_ensemble_reports, TrainReport};
use songembed::{
    ArtistSimilarity, Dataset, EmbeddingModel, Ensemble, EvalResult, Query, Scorer, SongRecord,
    SparseVector, TaskId, TrainConfig,
};

use crate::{
    Command, CosineEvalArgs, EncodeArgs, EnsembleEvalArgs, EvalArgs, EvalTarget, FitArgs,
    OvrEvalArgs, OvrTrainArgs, Preset, QueryArgs, SynthArgs, TrainArgs, EXIT_DATA, EXIT_IO,
    EXIT_USAGE,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
    Lib(songembed::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Data(_) => EXIT_DATA,
            CliError::Lib(e) if e.is_io() => EXIT_IO,
            CliError::Lib(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) => f.write_str(m),
            CliError::Lib(e) => e.fmt(f),
        }
    }
}

impl From<songembed::Error> for CliError {
    fn from(e: songembed::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

type Header = Vec<(String, String)>;

/// Attach the file name to errors raised while reading or writing `path`.
fn at<T>(path: &Path, r: songembed::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        songembed::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Query(a) => query(a),
        Command::FeaturizeFit(a) => featurize_fit(a),
        Command::FeaturizeEncode(a) => featurize_encode(a),
        Command::Synth(a) => synth(a),
        Command::EnsembleEval(a) => ensemble_eval(a),
        Command::OvrTrain(a) => ovr_train_cmd(a),
        Command::OvrEval(a) => ovr_eval(a),
        Command::CosineEval(a) => cosine_eval(a),
    }
}

fn kv(key: &str, value: impl fmt::Display) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn load_similarity(path: &Option<PathBuf>, data: &Dataset) -> Result<Option<ArtistSimilarity>> {
    path.as_ref()
        .map(|p| at(p, ArtistSimilarity::load(p, data.n_artists)))
        .transpose()
}

fn require_similarity(tasks: &[TaskId], sim: &Option<ArtistSimilarity>) -> Result<()> {
    if tasks.contains(&TaskId::SimArtist) && sim.is_none() {
        return Err(CliError::Data("task sa requires --artist-sim".into()));
    }
    Ok(())
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// `model.musl` -> `model.2.musl`.
fn member_path(base: &Path, i: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{i}"),
    };
    base.with_file_name(name)
}

fn train(a: TrainArgs) -> Result<()> {
    let data = at(&a.data, Dataset::load(&a.data))?;
    let valid = at(&a.valid, Dataset::load(&a.valid))?;
    let sim = load_similarity(&a.artist_sim, &data)?;
    require_similarity(&a.tasks, &sim)?;
    if a.members == 0 {
        return Err(CliError::Usage("--members must be at least 1".into()));
    }
    let config = TrainConfig {
        tasks: a.tasks.clone(),
        loss: a.loss,
        alpha: a.alpha,
        dim: a.dim,
        max_norm: a.max_norm,
        learning_rate: a.lr,
        max_steps: a.max_steps,
        eval_every: a.eval_every,
        patience: a.patience,
        seed: a.seed,
        k_eval: a.k_eval,
        song_pool: a.song_pool,
    };
    config.validate()?;

    let reports = train_ensemble_reports(&data, &valid, sim.as_ref(), &config, a.members)?;
    let mut header: Header = vec![
        kv("command", "train"),
        kv("data", a.data.display()),
        kv("valid", a.valid.display()),
        kv("artist_sim", show_path(&a.artist_sim)),
        kv("tasks", join(&config.tasks)),
        kv("loss", config.loss),
        kv("alpha", config.alpha),
        kv("C", config.max_norm),
        kv("lr", config.learning_rate),
        kv("dim", config.dim),
        kv("max_steps", config.max_steps),
        kv("eval_every", config.eval_interval(data.len())),
        kv("patience", config.patience),
        kv("k_eval", config.k_eval),
        kv("song_pool", config.song_pool.map_or("none".into(), |p| p.to_string())),
        kv("seed", config.seed),
        kv("members", a.members),
    ];
    for (i, r) in reports.iter().enumerate() {
        let path = if a.members == 1 { a.out.clone() } else { member_path(&a.out, i) };
        at(&path, r.model.save(&path))?;
        log::info!("saved {} after {} steps", path.display(), r.steps_taken);
        header.extend(member_summary(i, config.seed.wrapping_add(i as u64), &path, r));
    }

    let tasks = unique(&config.tasks);
    let models: Vec<EmbeddingModel> = reports.into_iter().map(|r| r.model).collect();
    let res = if models.len() == 1 {
        songembed::evaluate(&models[0], &valid, sim.as_ref(), &tasks, &[config.k_eval])?
    } else {
        let ens = Ensemble::new(models)?;
        songembed::evaluate(&ens, &valid, sim.as_ref(), &tasks, &[config.k_eval])?
    };
    header.push(kv("rows", "validation precision of the saved model(s)"));
    emit(&res.to_tsv(&header), &a.report)
}

fn member_summary(i: usize, seed: u64, path: &Path, r: &TrainReport) -> Header {
    let mut h = vec![kv(
        &format!("member.{i}"),
        format!(
            "seed={seed} out={} steps={} updates={} best_step={}",
            path.display(),
            r.steps_taken,
            r.updates,
            r.best_step.map_or("none".into(), |s| s.to_string())
        ),
    )];
    for c in &r.checkpoints {
        let per_task: Vec<String> = c.precision.iter().map(|(t, p)| format!("{t}={p:.6}")).collect();
        h.push(kv(
            &format!("member.{i}.checkpoint"),
            format!("step={} mean={:.6} {}", c.step, c.mean, per_task.join(" ")),
        ));
    }
    h
}

fn unique(tasks: &[TaskId]) -> Vec<TaskId> {
    let mut t = tasks.to_vec();
    t.sort();
    t.dedup();
    t
}

fn eval_header(command: &str, scorer: String, tasks: &[TaskId], t: &EvalTarget) -> Header {
    let mut ks = t.k.clone();
    ks.sort_unstable();
    ks.dedup();
    vec![
        kv("command", command),
        kv("scorer", scorer),
        kv("data", t.data.display()),
        kv("artist_sim", show_path(&t.artist_sim)),
        kv("tasks", join(tasks)),
        kv("k", join(&ks)),
        kv("rank_mode", if t.full_sort { "full-sort" } else { "top-k" }),
    ]
}

fn run_eval<S: Scorer>(
    scorer: &S,
    command: &str,
    label: String,
    tasks: &[TaskId],
    t: &EvalTarget,
) -> Result<()> {
    let data = at(&t.data, Dataset::load(&t.data))?;
    let sim = load_similarity(&t.artist_sim, &data)?;
    require_similarity(tasks, &sim)?;
    for &task in tasks {
        if !scorer.supports(task) {
            return Err(CliError::Usage(format!("{command} cannot evaluate task {task}")));
        }
    }
    let tasks = unique(tasks);
    let mode = if t.full_sort { RankMode::FullSort } else { RankMode::TopK };
    let res: EvalResult = evaluate_with(scorer, &data, sim.as_ref(), &tasks, &t.k, mode)?;
    let text = if t.table {
        res.to_table()
    } else {
        res.to_tsv(&eval_header(command, label, &tasks, t))
    };
    emit(&text, &t.out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = at(&a.model, EmbeddingModel::load(&a.model))?;
    run_eval(&model, "eval", a.model.display().to_string(), &a.tasks, &a.target)
}

fn ensemble_eval(a: EnsembleEvalArgs) -> Result<()> {
    let models = a
        .models
        .iter()
        .map(|p| at(p, EmbeddingModel::load(p)))
        .collect::<Result<Vec<_>>>()?;
    let ens = Ensemble::new(models)?;
    let label = a.models.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
    run_eval(&ens, "ensemble-eval", label, &a.tasks, &a.target)
}

fn ovr_train_cmd(a: OvrTrainArgs) -> Result<()> {
    use rand::SeedableRng;
    let data = at(&a.data, Dataset::load(&a.data))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let model = ovr_train(&data, a.label, a.epochs, a.lr, &mut rng)?;
    log::info!("training hinge loss {}", model.hinge_loss(&data));
    at(&a.out, model.save(&a.out))
}

fn ovr_eval(a: OvrEvalArgs) -> Result<()> {
    let data_header = at(&a.target.data, Dataset::load(&a.target.data))?;
    let other = match a.label {
        LabelKind::Tag => data_header.n_artists,
        LabelKind::Artist => data_header.n_tags,
    };
    let model = at(&a.model, OvrModel::load(&a.model, a.label))?.with_other_labels(other);
    let label = format!("{} ({})", a.model.display(), a.label);
    run_eval(&model, "ovr-eval", label, &[a.label.task()], &a.target)
}

fn cosine_eval(a: CosineEvalArgs) -> Result<()> {
    let data = at(&a.target.data, Dataset::load(&a.target.data))?;
    let scorer = CosineScorer { universe: data.universe() };
    run_eval(&scorer, "cosine-eval", "cosine".into(), &[TaskId::SimSong], &a.target)
}

fn query(a: QueryArgs) -> Result<()> {
    let model = at(&a.model, EmbeddingModel::load(&a.model))?;
    let data = at(&a.data, Dataset::load(&a.data))?;
    let find_song = |id: &str| {
        data.records
            .iter()
            .position(|r| r.song_id == id)
            .ok_or_else(|| CliError::Data(format!("song `{id}` not found in {}", a.data.display())))
    };
    let q = match (a.task.song_query(), &a.song, a.artist) {
        (true, Some(id), _) => {
            let i = find_song(id)?;
            Query::corpus_song(i, &data.records[i].features)
        }
        (false, _, Some(artist)) => Query::Artist(artist),
        (true, ..) => return Err(CliError::Usage(format!("task {} needs --song", a.task))),
        (false, ..) => return Err(CliError::Usage(format!("task {} needs --artist", a.task))),
    };
    let corpus: Vec<&SparseVector> = data.records.iter().map(|r| &r.features).collect();
    let ranked = model.rank_all(a.task, &q, &corpus, a.k)?;
    let mut out = String::from("rank\tid\tscore\n");
    for (pos, (id, score)) in ranked.items.iter().enumerate() {
        let name = if a.task.song_candidates() {
            data.records[*id].song_id.clone()
        } else {
            id.to_string()
        };
        out.push_str(&format!("{}\t{name}\t{score:.6}\n", pos + 1));
    }
    print!("{out}");
    Ok(())
}

/// `.frm` files in `dir`, sorted by name.
fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "frm"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no .frm files in {}", dir.display())));
    }
    Ok(files)
}

fn featurize_fit(a: FitArgs) -> Result<()> {
    let songs = frame_files(&a.frames)?
        .iter()
        .map(|p| at(p, FrameMatrix::load(p)))
        .collect::<Result<Vec<_>>>()?;
    let all = FrameMatrix::concat(&songs)?;
    let fit = kmeans_fit(&all, a.size, a.iters, a.seed)?;
    log::info!("k-means inertia {}", fit.inertia());
    at(&a.out, fit.codebook.save(&a.out))
}

fn featurize_encode(a: EncodeArgs) -> Result<()> {
    if a.codebook.len() != a.frames.len() {
        return Err(CliError::Usage("give one --frames directory per --codebook".into()));
    }
    let books = a
        .codebook
        .iter()
        .map(|p| at(p, Codebook::load(p)))
        .collect::<Result<Vec<_>>>()?;
    let labels = a.labels.as_ref().map(|p| at(p, Dataset::load(p))).transpose()?;
    let ids: Vec<String> = frame_files(&a.frames[0])?
        .iter()
        .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
        .collect();

    let mut records = Vec::with_capacity(ids.len());
    for id in &ids {
        let mut features: Option<SparseVector> = None;
        for (book, dir) in books.iter().zip(&a.frames) {
            let path = dir.join(format!("{id}.frm"));
            let frames = at(&path, FrameMatrix::load(&path))?;
            let enc = encode_counts(book, &frames)?;
            features = Some(match features {
                None => enc,
                Some(f) => f.concat(&enc),
            });
        }
        let features = features.expect("at least one codebook");
        let (artists, tags) = labels
            .as_ref()
            .and_then(|l| l.records.iter().find(|r| &r.song_id == id))
            .map(|r| (r.artists.clone(), r.tags.clone()))
            .unwrap_or_default();
        records.push(SongRecord::new(id.clone(), artists, tags, features));
    }
    let feat_dim = books.iter().map(Codebook::size).sum();
    let (n_artists, n_tags) = labels.as_ref().map_or((0, 0), |l| (l.n_artists, l.n_tags));
    let data = Dataset::new(records, n_artists, n_tags, feat_dim)?;
    at(&a.out, data.save(&a.out))
}

fn synth(a: SynthArgs) -> Result<()> {
    let s: SynthData = match a.preset {
        Preset::Separable => gen_separable(a.songs.unwrap_or(20), a.tags.unwrap_or(4), a.seed)?,
        Preset::Latent => gen_latent(&SynthSpec {
            n_songs: a.songs.unwrap_or(2000),
            n_artists: a.artists,
            n_tags: a.tags.unwrap_or(50),
            feat_dim: a.feat_dim,
            latent_dim: a.latent_dim,
            noise_sigma: a.noise,
            seed: a.seed,
            nnz_per_song: a.nnz,
            zipf_exponent: a.zipf,
            ..SynthSpec::default()
        })?,
    };
    fs::create_dir_all(&a.out)?;
    s.train.save(a.out.join("train.tsv"))?;
    s.valid.save(a.out.join("valid.tsv"))?;
    s.test.save(a.out.join("test.tsv"))?;
    fs::write(a.out.join("artist_sim.tsv"), s.similarity.to_text())?;
    Ok(())
}
