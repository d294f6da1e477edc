/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Gradient, curl and harmonic parts of the flow, concatenated.
     */
    decompose(): Float64Array;
    dim(): number;
    /**
     * Flattened endpoint pairs.
     */
    edges(): Uint32Array;
    /**
     * Eigenvector `index` of the last computed spectrum.
     */
    eigenvector(index: number): Float64Array;
    flow(): Float64Array;
    kind(): string;
    n_edges(): number;
    n_triangles(): number;
    /**
     * `kind` is circle, torus, flat_torus or strip.
     */
    constructor(kind: string, n: number, delta: number, seed: bigint);
    /**
     * Row-major coordinates.
     */
    points(): Float64Array;
    /**
     * Flow plus Gaussian noise of relative size `noise`, then low-pass
     * filtered with strength `alpha`. Returns noisy and smoothed copies,
     * concatenated.
     */
    smooth(noise: number, alpha: number, seed: bigint): Float64Array;
    /**
     * JSON `{eigenvalues, labels, beta1, gap_ratio}` for the lowest `k`
     * eigenpairs, which are kept for [`Demo::eigenvector`].
     */
    spectrum(k: number): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_decompose: (a: number) => [number, number, number, number];
    readonly demo_dim: (a: number) => number;
    readonly demo_edges: (a: number) => [number, number];
    readonly demo_eigenvector: (a: number, b: number) => [number, number, number, number];
    readonly demo_flow: (a: number) => [number, number];
    readonly demo_kind: (a: number) => [number, number];
    readonly demo_n_edges: (a: number) => number;
    readonly demo_n_triangles: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly demo_points: (a: number) => [number, number];
    readonly demo_smooth: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly demo_spectrum: (a: number, b: number) => [number, number, number, number];
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
