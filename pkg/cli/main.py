import sys
import os
import csv
import math
import argparse
import logging
from typing import Any, Dict, List, Optional

from tabulate import tabulate
from colorama import init, Fore, Style

current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)

sys.path.insert(0, parent_dir)

from models.attack_config import AttackConfig
from models.experiment import ExperimentConfig
from models.mc_config import McConfig
from models.network import Network
from models.network_spec import NetworkSpec, TrainConfig
from models.initializer_spec import InitializerSpec
from models.rng import Rng
from models.split_stats import LayerStatsInput
from services.analysis_service import AnalysisService
from services.attack_service import AttackService
from services.defense_service import DefenseService
from services.experiment_service import ExperimentService
from services.init_service import InitService
from services.knockout_service import KnockoutService
from services.montecarlo_service import MonteCarloService
from storage.settings import Settings
from storage.tensor_store import TensorStore
from validators.block_structure_validator import BlockStructureValidator
from validators.config_validator import ConfigValidator

init(autoreset=True)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Error en los argumentos: la CLI termina con código 1."""


class CliParser(argparse.ArgumentParser):
    """argparse sin sys.exit en los errores de uso."""

    def error(self, message):
        raise UsageError(message)


class MalInitApp:
    ANALYZE_COLUMNS = ['r', 'n', 'bias_ratio', 'sharpness', 'p_zero_small_block', 'p_zero_large_block']

    def __init__(self, settings: Optional[Settings] = None, store: Optional[TensorStore] = None):
        self.settings = settings or Settings()
        self.store = store or TensorStore(self.settings)
        self.analysis_service = AnalysisService()
        self.attack_service = AttackService()
        self.init_service = InitService()
        self.montecarlo_service = MonteCarloService(self.attack_service)
        self.knockout_service = KnockoutService(self.init_service)
        self.defense_service = DefenseService()
        self.experiment_service = ExperimentService(init_service=self.init_service,
                                                    attack_service=self.attack_service)
        self.config_validator = ConfigValidator()
        self.subparsers: Dict[str, CliParser] = {}
        self.parser = self.build_parser()

    # ========== PARSER ==========

    def build_parser(self) -> CliParser:
        common = CliParser(add_help=False, allow_abbrev=False)
        common.add_argument('-v', '--verbose', action='count', default=0, help="Más detalle en el log")
        common.add_argument('-q', '--quiet', action='store_true', help="Solo avisos y errores")
        common.add_argument('--config', help="Fichero JSON con valores para las opciones del subcomando")
        common.add_argument('--jobs', type=int, default=self.settings.get('jobs', 1),
                            help="Trabajadores en paralelo")
        common.add_argument('--output', dest='output_dir', default=None,
                            help="Directorio de salida")

        parser = CliParser(prog='malinit', allow_abbrev=False,
                           description="Ataques de inicialización maliciosa, análisis y defensas")
        sub = parser.add_subparsers(dest='command', metavar='SUBCOMANDO')

        def add(name: str, help_text: str) -> CliParser:
            p = sub.add_parser(name, help=help_text, parents=[common], allow_abbrev=False)
            self.subparsers[name] = p
            return p

        p = add('attack', "Aplica un ataque a un tensor o checkpoint")
        p.add_argument('--in', dest='input', help="Fichero .bin o directorio de checkpoint")
        p.add_argument('--out', dest='out', help="Destino (.bin o directorio)")
        self._add_attack_options(p, default_kind='soft_knockout')

        p = add('analyze', "CSV con la probabilidad analítica de desactivación")
        self._add_grid_options(p)
        p.add_argument('--wide-bias-coefficient', action='store_true',
                       help="Usa √(2/n) en el término del sesgo")
        p.add_argument('--sigma-a', type=float, default=None,
                       help="σ_A para el resumen de bloques (por defecto He: √(2/n))")
        p.add_argument('--permutation', type=int, nargs=2, metavar=('M', 'N'), default=None,
                       help="Forma m×n para log₁₀ de la probabilidad de la permutación")
        p.add_argument('--out', dest='out', help="Fichero CSV (por defecto, salida estándar)")

        p = add('montecarlo', "Frecuencias empíricas de desactivación")
        self._add_grid_options(p)
        p.add_argument('--trials', type=int, default=100000)
        p.add_argument('--rows', type=int, default=200, help="Filas de la matriz atacada")
        p.add_argument('--seed', type=int, default=0)
        p.add_argument('--active-widths', type=int, nargs='+', default=None,
                       help="Cuenta neuronas activas en una red densa con estos anchos")
        self._add_attack_options(p, default_kind='shift')
        p.add_argument('--out', dest='out', help="Fichero CSV (por defecto, salida estándar)")

        p = add('train', "Entrena una red con una semilla")
        self._add_experiment_options(p)
        p.add_argument('--seed', type=int, default=self.settings.get('seed_base', 42))
        p.add_argument('--out', dest='out', help="Directorio de checkpoint de la red entrenada")

        p = add('experiment', "Protocolo de varias semillas (línea base y ataque)")
        self._add_experiment_options(p)
        p.add_argument('--seeds', type=int, default=self.settings.get('seed_count', 50),
                       help="Número de semillas a partir de MALINIT_SEED")
        p.add_argument('--seed-list', type=int, nargs='+', default=None)
        p.add_argument('--name', default='experiment')
        p.add_argument('--paired', action='store_true', help="Ejecuta también la línea base y compara")
        p.add_argument('--malicious-lr', type=float, default=None)
        p.add_argument('--malicious-dropout', type=float, default=None)
        p.add_argument('--ablation', action='store_true', help="Variantes He/Glorot y Adam/SGD")

        p = add('knockout', "Knockout por optimización con normas de Frobenius fijas")
        p.add_argument('--in', dest='input', help="Checkpoint de red totalmente conectada")
        p.add_argument('--widths', type=int, nargs='+', default=[14, 7, 7, 2],
                       help="Anchos de una red nueva si no hay --in")
        p.add_argument('--out', dest='out', help="Directorio del checkpoint atacado")
        p.add_argument('--free-layers', type=int, default=2)
        p.add_argument('--iterations', type=int, default=200)
        p.add_argument('--step-size', type=float, default=0.05)
        p.add_argument('--probe-size', type=int, default=256)
        p.add_argument('--objective', choices=['relu', 'softmax'], default='relu')
        p.add_argument('--seed', type=int, default=0)

        p = add('detect', "Informe de detección de estructura por bloques")
        p.add_argument('--in', dest='input', help="Fichero .bin o directorio de checkpoint")
        p.add_argument('--out', dest='out', help="Directorio del informe")
        p.add_argument('--alpha', type=float, default=0.01)
        p.add_argument('--probe-size', type=int, default=64)
        p.add_argument('--seed', type=int, default=0)

        p = add('undo', "Rebaraja los pesos para deshacer un ataque de permutación")
        p.add_argument('--in', dest='input', help="Fichero .bin o directorio de checkpoint")
        p.add_argument('--out', dest='out', help="Destino (.bin o directorio)")
        p.add_argument('--seed', type=int, default=0)

        return parser

    @staticmethod
    def _add_attack_options(p: CliParser, default_kind: str):
        p.add_argument('--kind', default=default_kind, help=f"{', '.join(AttackConfig.KINDS)}")
        p.add_argument('--r', type=float, default=0.5)
        p.add_argument('--s', type=int, default=0)
        p.add_argument('--attacked-filters', type=int, default=1)
        p.add_argument('--scale-factor', type=float, default=1.0)
        p.add_argument('--placement', choices=AttackConfig.PLACEMENTS, default='stable')
        p.add_argument('--placement-seed', type=int, default=None)
        p.add_argument('--start-parity', action='store_true', help="El primer tensor es de cruce")

    @staticmethod
    def _add_grid_options(p: CliParser):
        p.add_argument('--r', type=float, nargs='+', default=[0.5])
        p.add_argument('--n', type=int, nargs='+', default=[100])
        p.add_argument('--bias-ratio', type=float, nargs='+', default=[0.0])
        p.add_argument('--sharpness', type=float, nargs='+', default=[1.0 / 3.0])

    def _add_experiment_options(self, p: CliParser):
        p.add_argument('--dataset', choices=ExperimentConfig.DATASET_KINDS, default='blobs')
        p.add_argument('--data-path', default=None, help="CSV, directorio IDX/MNIST o caché")
        p.add_argument('--label-column', default=-1)
        p.add_argument('--header', action='store_true')
        p.add_argument('--classes', type=int, default=4)
        p.add_argument('--features', type=int, default=20)
        p.add_argument('--per-class', type=int, default=250)
        p.add_argument('--separation', type=float, default=6.0)
        p.add_argument('--data-seed', type=int, default=0)
        p.add_argument('--flatten', action='store_true', help="Aplana las imágenes IDX")
        p.add_argument('--architecture', choices=ExperimentConfig.ARCHITECTURES, default='dense')
        p.add_argument('--hidden', type=int, nargs='+', default=[64, 64])
        p.add_argument('--second-hidden', type=int, default=None)
        p.add_argument('--filters', type=int, nargs='+', default=[16, 16])
        p.add_argument('--initializer', choices=InitializerSpec.KINDS, default='he')
        p.add_argument('--bias-value', type=float, default=None, help="Sesgo inicial constante")
        p.add_argument('--dropout', type=float, default=0.0)
        p.add_argument('--optimizer', choices=TrainConfig.OPTIMIZERS, default='adam')
        p.add_argument('--lr', type=float, default=0.001)
        p.add_argument('--epochs', type=int, default=10)
        p.add_argument('--batch-size', type=int, default=32)
        p.add_argument('--attack', dest='kind', default=None, help="Ataque antes de entrenar (ninguno por defecto)")
        p.add_argument('--r', type=float, default=0.5)
        p.add_argument('--s', type=int, default=0)
        p.add_argument('--attacked-filters', type=int, default=1)
        p.add_argument('--scale-factor', type=float, default=1.0)
        p.add_argument('--placement', choices=AttackConfig.PLACEMENTS, default='stable')
        p.add_argument('--placement-seed', type=int, default=None)
        p.add_argument('--start-parity', action='store_true')

    # ========== ARGUMENTOS Y CONFIGURACIÓN ==========

    def parse(self, argv: List[str]) -> argparse.Namespace:
        """Los flags explícitos tienen prioridad sobre el fichero --config."""
        args = self.parser.parse_args(argv)
        if args.command is None:
            raise UsageError("falta el subcomando")

        if args.config:
            subparser = self.subparsers[args.command]
            allowed = {a.dest for a in subparser._actions} - {'help', 'config'}
            try:
                values = self.config_validator.load_and_validate(args.config, allowed)
            except ValueError as e:
                raise UsageError(str(e))
            subparser.set_defaults(**values)
            args = self.parser.parse_args(argv)
        return args

    @staticmethod
    def _require(args: argparse.Namespace, *names: str):
        missing = [name for name in names if getattr(args, name, None) in (None, '')]
        if missing:
            flags = ', '.join('--in' if n == 'input' else f"--{n.replace('_', '-')}" for n in missing)
            raise UsageError(f"{args.command}: faltan argumentos obligatorios: {flags}")

    @staticmethod
    def _check_not_input(args: argparse.Namespace):
        if os.path.abspath(args.out) == os.path.abspath(args.input):
            raise UsageError("El destino no puede ser la entrada (los ficheros de entrada no se modifican)")

    def _output_dir(self, args: argparse.Namespace, leaf: str) -> str:
        return args.output_dir or os.path.join(self.settings.get('output_dir', './runs'), leaf)

    @staticmethod
    def _attack_config(args: argparse.Namespace) -> AttackConfig:
        return AttackConfig(kind=args.kind, r=args.r, s=args.s, attacked_filters=args.attacked_filters,
                            scale_factor=args.scale_factor, placement=args.placement,
                            placement_seed=args.placement_seed, start_parity=args.start_parity)

    def _experiment_config(self, args: argparse.Namespace, seeds: List[int], output_dir: str,
                           name: str) -> ExperimentConfig:
        dataset: Dict[str, Any] = {'kind': args.dataset, 'seed': args.data_seed}
        if args.dataset == 'blobs':
            dataset.update(classes=args.classes, features=args.features,
                           per_class=args.per_class, separation=args.separation)
        elif args.dataset == 'csv':
            label = args.label_column
            dataset.update(path=args.data_path, header=args.header,
                           label_column=int(label) if str(label).lstrip('-').isdigit() else label)
        elif args.dataset == 'idx':
            dataset.update(directory=args.data_path, flatten=args.flatten or args.architecture != 'conv')
        else:
            dataset.update(path=args.data_path)
        if args.dataset != 'blobs' and not args.data_path:
            raise UsageError(f"El dataset '{args.dataset}' necesita --data-path")

        initializer = InitializerSpec(kind=args.initializer) if args.bias_value is None else \
            InitializerSpec(kind=args.initializer, bias_policy='constant', bias_value=args.bias_value)
        network = {'architecture': args.architecture, 'hidden': args.hidden,
                   'second_hidden': args.second_hidden, 'filters': args.filters,
                   'initializer': initializer.to_dict(), 'dropout_rate': args.dropout}
        train = TrainConfig(optimizer=args.optimizer, learning_rate=args.lr, epochs=args.epochs,
                            batch_size=args.batch_size)
        attack = self._attack_config(args) if args.kind else None
        return ExperimentConfig(dataset=dataset, network=network, train=train, attack=attack,
                                seeds=seeds, output_dir=output_dir, jobs=args.jobs, name=name)

    # ========== SALIDA ==========

    @staticmethod
    def print_header(title: str):
        print(Fore.CYAN + "=" * 50)
        print(Fore.CYAN + title)
        print(Fore.CYAN + "=" * 50 + Style.RESET_ALL)

    @staticmethod
    def _write_csv(path: Optional[str], header: List[str], rows: List[List[Any]]):
        if path:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(header)
                writer.writerows(rows)
        else:
            writer = csv.writer(sys.stdout)
            writer.writerow(header)
            writer.writerows(rows)

    @staticmethod
    def _fmt(value: float) -> str:
        return "nan" if math.isnan(value) else f"{value:.6g}"

    # ========== SUBCOMANDOS ==========

    def cmd_attack(self, args: argparse.Namespace) -> int:
        self._require(args, 'input', 'out')
        self._check_not_input(args)
        cfg = self._attack_config(args)
        tensors, manifest = self.store.load_any(args.input)

        weights = [t for t in tensors if t.layout != 'bias']
        attacked = iter(self.attack_service.attack_network(weights, cfg))
        result = [t if t.layout == 'bias' else next(attacked) for t in tensors]

        manifest = dict(manifest)
        manifest.pop('parameters', None)
        manifest['attack'] = cfg.to_dict()
        self.store.save_any(args.out, result, manifest)

        rows = [[after.name, 'x'.join(map(str, after.shape)), after.layout,
                 self._fmt(float(before.data.mean())), self._fmt(float(after.data.mean())),
                 "✅" if before.same_multiset(after) else "≠"]
                for before, after in zip(tensors, result)]
        self.print_header(f"⚔️  ATAQUE {cfg}")
        print(tabulate(rows, headers=["Tensor", "Forma", "Tipo", "Media antes", "Media después",
                                      "Multiconjunto"], tablefmt="simple"))
        print(Fore.GREEN + f"\n✅ Guardado en {args.out}")
        return EXIT_OK

    def cmd_analyze(self, args: argparse.Namespace) -> int:
        curve = self.analysis_service.p_zero_curve(args.r, args.n, args.bias_ratio, args.sharpness,
                                                   args.wide_bias_coefficient)
        rows = [[f"{p['r']:g}", p['n'], f"{p['bias_ratio']:g}", f"{p['sharpness']:.6g}",
                 f"{p['p_zero_small_block']:.6f}", f"{p['p_zero_large_block']:.6f}"] for p in curve]
        self._write_csv(args.out, self.ANALYZE_COLUMNS, rows)

        if not args.out:
            return EXIT_OK

        self.print_header("📐 ANÁLISIS DE BLOQUES")
        summary = []
        for r in args.r:
            if not 0.0 < r < 1.0:
                continue
            for n in args.n:
                sigma_a = args.sigma_a or math.sqrt(2.0 / n)
                stats = self.analysis_service.describe(r, sigma_a)
                summary.append([f"{r:g}", n, f"{sigma_a:.4g}", f"{stats['c']:.4g}",
                                f"{stats['mu_s']:.4g}", f"{stats['mu_l']:.4g}"])
        if summary:
            print(tabulate(summary, headers=["r", "n", "σ_A", "corte", "μ_S", "μ_L"], tablefmt="simple"))
        if args.permutation:
            m, n = args.permutation
            chances = [[f"{r:g}", f"{self.analysis_service.permutation_chance_log10(m, n, r):.6g}"]
                       for r in args.r]
            print(tabulate(chances, headers=["r", f"log10 P ({m}x{n})"], tablefmt="simple"))
        print(Fore.GREEN + f"\n✅ {len(rows)} filas en {args.out}")
        return EXIT_OK

    def cmd_montecarlo(self, args: argparse.Namespace) -> int:
        if args.active_widths:
            return self._active_neurons(args)

        rows = []
        for r in args.r:
            for n in args.n:
                sigma_a = math.sqrt(2.0 / n)
                for bias_ratio in args.bias_ratio:
                    for sharpness in args.sharpness:
                        params = LayerStatsInput(n=n, bias_ratio=bias_ratio, sharpness=sharpness, r=r)
                        cfg = McConfig.for_sharpness(sharpness, args.trials, seed=args.seed, jobs=args.jobs)
                        p_small, p_large = self.montecarlo_service.estimate_block_p_zero(
                            params, sigma_a, cfg, rows=args.rows, matrix_seed=args.seed)
                        a_small, a_large = (self.analysis_service.p_zero_from_ratio(v)
                                            for v in self.analysis_service.dimensionless_ratios(params))
                        rows.append([f"{r:g}", n, f"{bias_ratio:g}", f"{sharpness:.6g}",
                                     self._fmt(p_small), self._fmt(p_large),
                                     f"{a_small:.6f}", f"{a_large:.6f}"])
        self._write_csv(args.out, self.ANALYZE_COLUMNS + ['analytic_small_block', 'analytic_large_block'], rows)
        return EXIT_OK

    def _active_neurons(self, args: argparse.Namespace) -> int:
        widths = args.active_widths
        if len(widths) < 2:
            raise UsageError("--active-widths necesita al menos entrada y salida")
        spec = NetworkSpec.dense_net(widths[0], widths[1:-1], widths[-1])
        net = self.init_service.init_network(spec, Rng(args.seed))
        cfg = self._attack_config(args)
        net.set_weights(self.attack_service.attack_network(net.weight_tensors(), cfg))

        mc = McConfig(trials=args.trials, seed=args.seed, jobs=args.jobs)
        counts = self.montecarlo_service.active_neuron_count(net, mc)
        fraction = self.montecarlo_service.nonzero_output_fraction(net, mc)

        rows = [[i, width, count] for i, (width, count) in enumerate(zip(widths[1:], counts))]
        if args.out:
            self._write_csv(args.out, ['layer', 'width', 'active'], rows)
        self.print_header(f"🔬 NEURONAS ACTIVAS ({cfg})")
        print(tabulate(rows, headers=["Capa", "Ancho", "Activas"], tablefmt="simple"))
        print(f"\nFracción de salidas finales no nulas: {fraction:.6g}")
        return EXIT_OK

    def cmd_train(self, args: argparse.Namespace) -> int:
        out = args.out or self._output_dir(args, 'train')
        cfg = self._experiment_config(args, [args.seed], out, 'train')
        service = self.experiment_service
        dataset = service.load_dataset(cfg.dataset)
        spec = service.build_spec(cfg.network, dataset)
        net = service.build_network(spec, args.seed, cfg.attack)
        record, trace = service.train_network(net, cfg, dataset, args.seed)

        manifest = net.manifest()
        manifest.update({'train': cfg.train.to_dict(), 'seed': args.seed, 'trace': trace.to_dict(),
                         'attack': cfg.attack.to_dict() if cfg.attack else None})
        self.store.save_checkpoint(out, net.to_tensors(), manifest)

        self.print_header(f"🏋️  ENTRENAMIENTO ({cfg.variant})")
        rows = [[row['epoch'], f"{row['train_loss']:.4f}", f"{row['test_loss']:.4f}",
                 f"{row['test_acc']:.4f}", f"{row['dead_fraction']:.3f}"] for row in trace.rows(args.seed)]
        print(tabulate(rows, headers=["Época", "Pérdida", "Pérdida test", "Precisión", "Muertas"],
                       tablefmt="simple"))
        if record.diverged:
            print(Fore.RED + f"\n⚠️ Divergencia en la época {record.diverged_at}")
        print(Fore.GREEN + f"\n✅ Mejor precisión {record.best_test_accuracy:.4f} "
                           f"(época {record.best_epoch}); checkpoint en {out}")
        return EXIT_OK

    def cmd_experiment(self, args: argparse.Namespace) -> int:
        seeds = args.seed_list or self.settings.default_seeds(args.seeds)
        out = self._output_dir(args, args.name)
        cfg = self._experiment_config(args, seeds, out, args.name)
        cfg = self.experiment_service.override_training(cfg, learning_rate=args.malicious_lr,
                                                        dropout_rate=args.malicious_dropout)

        if args.ablation:
            variants = self.experiment_service.ablation_configs(cfg)
            table = []
            for label, variant in variants.items():
                records = self.experiment_service.run_experiment(variant)
                accs = sorted(r.best_test_accuracy for r in records)
                table.append([label, len(records), f"{accs[len(accs) // 2]:.4f}"])
            self.print_header("🧪 ABLACIONES")
            print(tabulate(table, headers=["Variante", "Semillas", "Mediana precisión"], tablefmt="simple"))
            return EXIT_OK

        if args.paired:
            result = self.experiment_service.run_paired(cfg)
            summary = result['summary']
            self.print_header(f"🧪 COMPARACIÓN ({cfg.variant})")
            print(tabulate([[k, f"{v:.4f}" if isinstance(v, float) else v] for k, v in summary.items()],
                           headers=["Métrica", "Valor"], tablefmt="simple"))
            print(Fore.GREEN + f"\n✅ Resultados en {out}")
            return EXIT_OK

        records = self.experiment_service.run_experiment(cfg)
        self.print_header(f"🧪 EXPERIMENTO {cfg.name} ({cfg.variant})")
        rows = [[r.seed, f"{r.best_test_accuracy:.4f}", r.best_epoch, r.epochs_to_95,
                 self._fmt(r.final_loss), "⚠️" if r.diverged else ""] for r in records]
        print(tabulate(rows, headers=["Semilla", "Mejor precisión", "Época", "Épocas al 95%",
                                      "Pérdida final", ""], tablefmt="simple"))
        print(Fore.GREEN + f"\n✅ Resultados en {out}")
        return EXIT_OK

    def cmd_knockout(self, args: argparse.Namespace) -> int:
        out = args.out or self._output_dir(args, 'knockout')
        if args.input:
            self._check_not_input(argparse.Namespace(out=out, input=args.input))
            tensors, manifest = self.store.load_checkpoint(args.input)
            if 'spec' not in manifest:
                raise ValueError(f"{args.input} no contiene la arquitectura de la red")
            net = Network.from_tensors(NetworkSpec.from_dict(manifest['spec']), tensors)
        else:
            widths = args.widths
            if len(widths) < 2:
                raise UsageError("--widths necesita al menos entrada y salida")
            spec = NetworkSpec.dense_net(widths[0], widths[1:-1], widths[-1])
            net = self.init_service.init_network(spec, Rng(args.seed))

        problem = self.knockout_service.problem_from_network(
            net, free_layers=args.free_layers, probe_size=args.probe_size, seed=args.seed,
            iterations=args.iterations, step_size=args.step_size, objective=args.objective)
        result = self.knockout_service.optimize_knockout(problem)
        attacked = self.knockout_service.apply(net, result)

        manifest = attacked.manifest()
        manifest['knockout'] = result.to_dict()
        self.store.save_checkpoint(out, attacked.to_tensors(), manifest)

        self.print_header("🎯 KNOCKOUT POR OPTIMIZACIÓN")
        print(tabulate([["Objetivo inicial", f"{result.initial_objective:.6g}"],
                        ["Objetivo final", f"{result.final_objective:.6g}"],
                        ["Reducción", f"{result.reduction:.2%}"],
                        ["Iteraciones", result.iterations_run],
                        ["Error de norma máx.", f"{max(result.norm_errors()):.2e}"]],
                       headers=["Métrica", "Valor"], tablefmt="simple"))
        print(Fore.GREEN + f"\n✅ Checkpoint en {out}")
        return EXIT_OK

    def cmd_detect(self, args: argparse.Namespace) -> int:
        self._require(args, 'input')
        tensors, manifest = self.store.load_any(args.input)

        net, probe = None, None
        if 'spec' in manifest:
            spec = NetworkSpec.from_dict(manifest['spec'])
            if spec.is_conv:
                net = Network.from_tensors(spec, tensors)
                probe = Rng(args.seed).uniform(0.0, 1.0, (args.probe_size,) + spec.input_shape)

        out = args.out or self._output_dir(args, 'detect')
        defense = DefenseService(BlockStructureValidator(args.alpha))
        report = defense.detect_tensors(tensors, out, net=net, probe=probe)

        self.print_header("🛡️  DETECCIÓN")
        rows = [[layer['name'], 'x'.join(map(str, layer['shape'])), f"{layer['p_value']:.3g}",
                 (Fore.RED if layer['verdict'] == 'suspicious' else Fore.GREEN) + layer['verdict'] + Style.RESET_ALL]
                for layer in report.layers]
        print(tabulate(rows, headers=["Tensor", "Forma", "p-valor", "Veredicto"], tablefmt="simple"))
        color = Fore.RED if report.suspicious else Fore.GREEN
        print(color + f"\nVeredicto: {report.verdict} (α={report.alpha}); informe en {out}")
        return EXIT_OK

    def cmd_undo(self, args: argparse.Namespace) -> int:
        self._require(args, 'input', 'out')
        self._check_not_input(args)
        tensors, manifest = self.store.load_any(args.input)
        shuffled = self.defense_service.reshuffle_tensors(tensors, args.seed)

        manifest = dict(manifest)
        manifest.pop('parameters', None)
        manifest['reshuffle_seed'] = args.seed
        self.store.save_any(args.out, shuffled, manifest)
        print(Fore.GREEN + f"✅ {sum(t.layout != 'bias' for t in tensors)} tensores rebarajados en {args.out}")
        return EXIT_OK

    # ========== PUNTO DE ENTRADA ==========

    def run(self, argv: Optional[List[str]] = None) -> int:
        argv = list(sys.argv[1:] if argv is None else argv)
        try:
            args = self.parse(argv)
        except UsageError as e:
            self.parser.print_usage(sys.stderr)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE

        self.settings.set_verbosity(args.verbose, args.quiet)
        handler = getattr(self, f"cmd_{args.command}")
        try:
            return handler(args)
        except UsageError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except Exception as e:
            logger.debug("Fallo en el subcomando", exc_info=True)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> int:
    return MalInitApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())
