package fx;

import java.util.HashMap;
import java.util.Map;

public class Registry {
    private final Map<String, Point> points = new HashMap<>();
    private final Counter counter = new Counter();

    public void register(String key, Point p) {
        if (key == null || p == null) {
            throw new IllegalArgumentException("missing");
        }
        points.put(key, p);
        counter.increment();
    }

    public Point lookup(String key) {
        return points.get(key);
    }

    public int size() {
        return points.size();
    }
}
