/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    databaseSize(): number;
    depthHeight(): number;
    depthRgba(): Uint8Array;
    depthWidth(): number;
    /**
     * Empty when the current view has no ground plane.
     */
    egospaceRgba(size: number): Uint8Array;
    /**
     * `template` is one of open, single-box, corridor, y-junction,
     * corner-turn, random.
     */
    constructor(template: string, seed: number);
    /**
     * Prediction view as JSON.
     */
    predict(k: number, max_iters: number): string;
    /**
     * Empty before the first prediction of the current view.
     */
    psiRgba(size: number): Uint8Array;
    /**
     * Angles in radians; returns the pose view as JSON.
     */
    setPose(x: number, z: number, yaw: number, pitch: number): string;
    /**
     * World bounds and boxes as JSON.
     */
    worldJson(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_databaseSize: (a: number) => number;
    readonly demo_depthHeight: (a: number) => number;
    readonly demo_depthRgba: (a: number) => [number, number];
    readonly demo_depthWidth: (a: number) => number;
    readonly demo_egospaceRgba: (a: number, b: number) => [number, number];
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_predict: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_psiRgba: (a: number, b: number) => [number, number];
    readonly demo_setPose: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_worldJson: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
