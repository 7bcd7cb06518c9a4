// Internal message service. All cross-component communication goes through
// here; components never call each other or share globals.

import type {
  DataSetKey,
  InstrumentationSample,
  ValueRange,
  ViewKind,
} from "./types.js";

/** Topic name to payload type. Extending this map is the only way to add a topic. */
export interface BusTopics {
  "dataset/displayed": { key: DataSetKey; nPoints: number; fromCache: boolean };
  "dataset/cleared": { keys: DataSetKey[] };
  "scene/flushed": Record<string, never>;
  "legend/updated": { range: ValueRange | null; label: string };
  "view/switched": { view: ViewKind };
  "background/set": { id: string };
  "input/rotate": { dx: number; dy: number };
  "input/zoom": { delta: number };
  "instrumentation/sample": { sample: InstrumentationSample };
  "instrumentation/fps": { fps: number };
  "error": { source: string; message: string };
  "error/cleared": Record<string, never>;
}

export type Topic = keyof BusTopics;

type Handler<T extends Topic> = (payload: BusTopics[T]) => void;

/** Returned by subscribe; call to detach the handler. */
export type Unsubscribe = () => void;

export class MessageBus {
  private handlers = new Map<Topic, Set<Handler<Topic>>>();

  subscribe<T extends Topic>(topic: T, handler: Handler<T>): Unsubscribe {
    let set = this.handlers.get(topic);
    if (!set) {
      set = new Set();
      this.handlers.set(topic, set);
    }
    set.add(handler as Handler<Topic>);
    return () => {
      set.delete(handler as Handler<Topic>);
    };
  }

  /**
   * Deliver synchronously, in subscription order. A handler added while a
   * publish is in flight does not see the in-flight message.
   */
  publish<T extends Topic>(topic: T, payload: BusTopics[T]): void {
    const set = this.handlers.get(topic);
    if (!set) return;
    for (const handler of [...set]) {
      handler(payload);
    }
  }

  subscriberCount(topic: Topic): number {
    return this.handlers.get(topic)?.size ?? 0;
  }
}
