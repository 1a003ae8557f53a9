/* tslint:disable */
/* eslint-disable */

/**
 * A noisy benchmark signal and its estimate.
 */
export class SignalFit {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly eta_hat: Float64Array;
    readonly levels: Uint32Array;
    readonly regressions: number;
    readonly rel_rmse: number;
    readonly x: Float64Array;
    readonly y_noisy: Float64Array;
    readonly y_true: Float64Array;
}

/**
 * `[n, clipped bound, ...]` for `n = 2^lo ..= 2^hi` at a Haar cell with
 * uniform design and standard Gaussian noise.
 */
export function bound_curve(level: number, delta: number, lo: number, hi: number): Float64Array;

/**
 * Fits `signal` on a random design of `n_raw` draws. `level < 0` selects
 * the adaptive estimator.
 */
export function fit_signal(signal: string, n_raw: number, snr: number, order: number, level: number, seed: bigint): SignalFit;

/**
 * `[x0, phi0, x1, phi1, ...]` for the order-`order` scaling function,
 * thinned to about `points` samples.
 */
export function scaling_curve(order: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_signalfit_free: (a: number, b: number) => void;
    readonly bound_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly fit_signal: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly scaling_curve: (a: number, b: number) => [number, number, number, number];
    readonly signalfit_eta_hat: (a: number) => [number, number];
    readonly signalfit_levels: (a: number) => [number, number];
    readonly signalfit_regressions: (a: number) => number;
    readonly signalfit_rel_rmse: (a: number) => number;
    readonly signalfit_x: (a: number) => [number, number];
    readonly signalfit_y_noisy: (a: number) => [number, number];
    readonly signalfit_y_true: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
