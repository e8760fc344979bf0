import org.junit.Test;

public class PrefixTest {
    @Test
    public void testGetByPrefix(){
        Config con = new Config();
        tc.set(PROP_PREFIX);
        var p = tc.getAllProperties();
        assertEquals("prop", p);

        tc.set(SCAN_PREFIX);
        p = tc.getAllProperties();
        assertEquals("scan", p);}
}
