/* tslint:disable */
/* eslint-disable */

/**
 * Runs one random sequence through the built circuit (or its control with
 * the position-zero MLP removed). Returns the designated sink head's
 * attention, per-position final norms and the stage of the sequence.
 */
export function circuit_trace(len: number, seed: bigint, control: boolean): string;

/**
 * Analytic and Monte Carlo `E‖c‖²` against context length.
 * `sparse_k = 0` means uniform weights.
 */
export function mixing(alpha: number, max_len: number, trials: number, sparse_k: number, seed: bigint): string;

/**
 * How far the normalized output moves under a fixed perturbation as the
 * input is scaled up.
 */
export function stability(dim: number, max_gain: number, rel_perturb: number, trials: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly circuit_trace: (a: number, b: bigint, c: number) => [number, number, number, number];
    readonly mixing: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly stability: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
