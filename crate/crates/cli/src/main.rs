use std::error::Error as StdError;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use subreg::processor::{self, TrainOptions};
use subreg::{Model, PieceId, Processor, SampleSize, Sampler, SamplingConfig, TrainingEvent};

type BoxError = Box<dyn StdError + Send + Sync>;

#[derive(Parser)]
#[command(name = "subreg", version, about = "Subword segmentation with a unigram language model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelType {
    Unigram,
    Bpe,
}

impl From<ModelType> for subreg::ModelType {
    fn from(t: ModelType) -> Self {
        match t {
            ModelType::Unigram => subreg::ModelType::Unigram,
            ModelType::Bpe => subreg::ModelType::Bpe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pieces,
    Ids,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a text file with one sentence per line
    Train {
        #[arg(long, value_enum, default_value = "unigram")]
        model_type: ModelType,
        /// Training text; "-" reads stdin
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Number of ids in the final model, reserved ids included
        #[arg(long)]
        vocab_size: usize,
        /// Seed vocabulary size (unigram only)
        #[arg(long)]
        seed_size: Option<usize>,
        /// Fraction of removable pieces kept per pruning round (unigram only)
        #[arg(long, default_value_t = 0.8)]
        eta: f64,
        #[arg(long, default_value_t = 16)]
        max_piece_len: usize,
    },
    /// Segment stdin, one line per sentence
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "pieces")]
        output_format: Format,
        /// Worker threads; output order is unchanged
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Turn segmentations on stdin back into text
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "pieces")]
        input_format: Format,
    },
    /// Sample segmentations of each stdin line (unigram only)
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Candidate count, or "inf" to sample from all segmentations
        #[arg(long)]
        l: SampleSize,
        #[arg(long)]
        alpha: f64,
        /// RNG seed; chosen at random and printed to stderr when omitted
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per line
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Print the n best segmentations of each stdin line (unigram only)
    Nbest {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        with_posteriors: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_target(false)
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(e.as_ref()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subreg: {e}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &(dyn StdError + 'static)) -> bool {
    let io = e
        .downcast_ref::<io::Error>()
        .or_else(|| match e.downcast_ref::<subreg::Error>() {
            Some(subreg::Error::Io(io)) => Some(io),
            _ => None,
        });
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn run(command: Command) -> Result<(), BoxError> {
    match command {
        Command::Train {
            model_type,
            input,
            model_out,
            vocab_size,
            seed_size,
            eta,
            max_piece_len,
        } => {
            let text = read_input(&input)?;
            let options = TrainOptions {
                seed_size,
                shrink_ratio: eta,
                max_piece_length: max_piece_len,
                ..TrainOptions::new(model_type.into(), vocab_size)
            };
            let model = processor::train(text.lines(), &options, |event| {
                if let TrainingEvent::Iteration { .. } = event {
                    eprintln!("{event}");
                }
            })?;
            if let Model::Bpe(m) = &model {
                eprintln!("merges={} vocab={}", m.merges().len(), m.num_ids());
            }
            model.save(&model_out)?;
            Ok(())
        }
        Command::Encode {
            model,
            output_format,
            threads,
        } => {
            let processor = Processor::load(&model)?;
            let encode = |line: &str| -> subreg::Result<String> {
                Ok(match output_format {
                    Format::Pieces => processor.encode_pieces(line)?.join(" "),
                    Format::Ids => join_ids(&processor.encode_ids(line)?),
                })
            };
            if threads > 1 {
                encode_parallel(threads, encode)
            } else {
                for_each_line(|_, line, out| {
                    writeln!(out, "{}", encode(line)?)?;
                    Ok(())
                })
            }
        }
        Command::Decode { model, input_format } => {
            let processor = Processor::load(&model)?;
            for_each_line(|_, line, out| {
                let text = match input_format {
                    Format::Pieces => processor.decode_pieces(&line.split_whitespace().collect::<Vec<_>>()),
                    Format::Ids => processor.decode_ids(&parse_ids(line)?)?,
                };
                writeln!(out, "{text}")?;
                Ok(())
            })
        }
        Command::Sample {
            model,
            l,
            alpha,
            seed,
            k,
        } => {
            let processor = Processor::load(&model)?;
            processor.unigram("sampling")?;
            let config = SamplingConfig { l, alpha, k };
            config.validate()?;
            let mut sampler = seed.map_or_else(Sampler::from_entropy, Sampler::new);
            eprintln!("seed={}", sampler.seed());
            for_each_line(|_, line, out| {
                for pieces in processor.sample(line, &config, &mut sampler)? {
                    writeln!(out, "{}", pieces.join(" "))?;
                }
                Ok(())
            })
        }
        Command::Nbest {
            model,
            n,
            with_posteriors,
        } => {
            let processor = Processor::load(&model)?;
            processor.unigram("nbest")?;
            if n == 0 {
                return Err("--n must be at least 1".into());
            }
            for_each_line(|line_no, line, out| {
                for (pieces, posterior) in processor.nbest(line, n)? {
                    write!(out, "{line_no}\t{}", pieces.join(" "))?;
                    if with_posteriors {
                        write!(out, "\t{posterior:.6e}")?;
                    }
                    writeln!(out)?;
                }
                Ok(())
            })
        }
    }
}

fn read_input(path: &PathBuf) -> Result<String, BoxError> {
    let bytes = if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::Read::read_to_end(&mut io::stdin().lock(), &mut buf)?;
        buf
    } else {
        fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?
    };
    String::from_utf8(bytes).map_err(|e| format!("{}: input is not valid UTF-8: {e}", path.display()).into())
}

fn join_ids(ids: &[PieceId]) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_ids(line: &str) -> Result<Vec<PieceId>, BoxError> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("not a piece id: {t:?}").into()))
        .collect()
}

/// Reads stdin line by line, calling `f(line_no, line, out)` and flushing
/// after every line so the tool works inside a pipe. Line numbers start at 1.
fn for_each_line(
    mut f: impl FnMut(usize, &str, &mut dyn Write) -> Result<(), BoxError>,
) -> Result<(), BoxError> {
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|e| format!("line {line_no}: input is not valid UTF-8: {e}"))?;
        let line = line.strip_suffix('\n').unwrap_or(line);
        f(line_no, line, &mut out).map_err(|e| -> BoxError {
            if is_broken_pipe(e.as_ref()) {
                e
            } else {
                format!("line {line_no}: {e}").into()
            }
        })?;
        out.flush()?;
    }
    out.flush()?;
    Ok(())
}

/// Encodes stdin in batches on a thread pool, keeping input order.
fn encode_parallel(
    threads: usize,
    encode: impl Fn(&str) -> subreg::Result<String> + Sync,
) -> Result<(), BoxError> {
    const BATCH: usize = 4096;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut first_line = 1;
    loop {
        let batch: Vec<String> = lines.by_ref().take(BATCH).collect::<io::Result<_>>()?;
        if batch.is_empty() {
            break;
        }
        let encoded: Vec<subreg::Result<String>> = pool.install(|| batch.par_iter().map(|l| encode(l)).collect());
        for (i, result) in encoded.into_iter().enumerate() {
            let line = result.map_err(|e| format!("line {}: {e}", first_line + i))?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        first_line += batch.len();
    }
    Ok(())
}
