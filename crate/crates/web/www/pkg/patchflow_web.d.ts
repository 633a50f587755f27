/* tslint:disable */
/* eslint-disable */

/**
 * A running simulation of one of the built-in presets.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances `k` steps; stops early with an error if the scheme fails.
     */
    advance(k: number): void;
    /**
     * Row-major density, `y` increasing with the row index.
     */
    density(): Float64Array;
    mass(): number;
    /**
     * `n x n` grid; `n0` and `b` override the preset's nutrient level and death rate.
     */
    constructor(name: string, n: number, n0: number, b: number);
    nutrient(): Float64Array;
    pressure(): Float64Array;
    size(): number;
    time(): number;
}

/**
 * c-transform of `p` sampled on `p.len()` cells covering an interval of length `len`.
 */
export function ctransform_1d(p: Float64Array, len: number, tau: number): Float64Array;

/**
 * `m(t)` at `samples` evenly spaced times in `[0, t_final]`.
 */
export function mass_factor_curve(n0: number, t_final: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly ctransform_1d: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly mass_factor_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulation_advance: (a: number, b: number) => [number, number];
    readonly simulation_density: (a: number) => [number, number];
    readonly simulation_mass: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly simulation_nutrient: (a: number) => [number, number];
    readonly simulation_pressure: (a: number) => [number, number];
    readonly simulation_size: (a: number) => number;
    readonly simulation_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
